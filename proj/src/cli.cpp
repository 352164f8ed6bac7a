#include "deepframe/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepframe/archspec.hpp"
#include "deepframe/coherence.hpp"
#include "deepframe/frame.hpp"
#include "deepframe/inference.hpp"
#include "deepframe/io.hpp"
#include "deepframe/minimizer.hpp"
#include "deepframe/rng.hpp"
#include "deepframe/selection.hpp"
#include "deepframe/version.hpp"

namespace deepframe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ArchitectureSpec read_spec(const std::string& path) {
    auto spec = load_spec(path);
    if (spec.name.empty()) spec.name = fs::path(path).stem().string();
    return spec;
}

std::vector<std::string> spec_files(const std::vector<std::string>& inputs) {
    std::vector<std::string> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& e : fs::directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path().string());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(in);
        }
    }
    return files;
}

json header(const RunConfig& cfg, const std::string& hash) {
    json h = {{"tool", kToolName}, {"version", kVersion}, {"command", cfg.subcommand}, {"seed", cfg.seed}};
    if (!hash.empty()) h["spec_hash"] = hash;
    return h;
}

void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out.empty() || cfg.out == "-")
        out << text;
    else
        write_text_file(cfg.out, text);
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

MinimizeOptions minimize_options(const RunConfig& cfg) {
    MinimizeOptions opts;
    opts.seed = cfg.seed;
    if (cfg.iters > 0) opts.max_iters = cfg.iters;
    opts.restarts = cfg.restarts;
    opts.refine_exponent = cfg.refine_exponent;
    opts.threads = cfg.threads;
    check_options(opts);
    return opts;
}

FrameParams params_for(const FrameLayout& layout, const RunConfig& cfg) {
    return cfg.params.empty() ? random_params(layout, cfg.seed) : load_params(layout, cfg.params);
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto files = spec_files(cfg.inputs);
    if (files.empty()) {
        err << "validate: no spec files given\n";
        return kExitInput;
    }
    int status = kExitOk;
    for (const auto& f : files) {
        try {
            const auto spec = read_spec(f);
            out << "OK " << f << " (" << spec.name << "): " << spec.depth() << " layers, "
                << to_string(spec.connectivity.pattern) << ", " << param_count(spec) << " params\n";
        } catch (const SpecError& e) {
            status = kExitInput;
            err << "INVALID " << f << "\n";
            for (const auto& d : e.diagnostics()) err << "  " << d.location << ": " << d.message << "\n";
        }
    }
    return status;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = Clock::now();
    const auto spec = read_spec(cfg.inputs.at(0));
    auto layout = std::make_shared<const FrameLayout>(make_layout(spec));
    const auto frame = build_global_frame(layout, params_for(*layout, cfg));
    const auto report = analyze(frame);
    if (!cfg.export_frame.empty()) write_matrix_binary(cfg.export_frame, normalize(frame).frame.materialize());
    if (cfg.format == OutputFormat::csv) {
        emit(cfg, report_csv_header() + "\n" + report_csv_row(report) + "\n", out);
    } else {
        json doc = header(cfg, spec_hash(spec));
        doc["params_source"] = cfg.params.empty() ? "random" : "file";
        doc["report"] = to_json(report);
        doc["timing"] = {{"wall_seconds", seconds_since(t0)}};
        emit(cfg, dump(doc), out);
    }
    return kExitOk;
}

int cmd_minimize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = Clock::now();
    const auto spec = read_spec(cfg.inputs.at(0));
    const auto opts = minimize_options(cfg);
    const auto layout = make_layout(spec);
    const auto result = minimize_deep_frame_potential(spec, opts);
    for (std::size_t r = 0; r < result.restarts.size(); ++r)
        if (result.restarts[r].failed) err << "restart " << r << " failed: " << result.restarts[r].message << "\n";
    std::ostringstream traj;
    traj << "iteration,objective,mutual_coherence\n" << std::setprecision(17);
    for (const auto& p : result.restarts[static_cast<std::size_t>(result.best_restart)].trajectory)
        traj << p.iteration << ',' << p.objective << ',' << p.coherence << '\n';
    if (!cfg.trajectory.empty()) write_text_file(cfg.trajectory, traj.str());
    if (cfg.format == OutputFormat::csv) {
        emit(cfg, traj.str(), out);
    } else {
        json doc = header(cfg, spec_hash(spec));
        doc["options"] = {{"max_iters", opts.max_iters},     {"step", opts.step},
                          {"tolerance", opts.tolerance},     {"window", opts.window},
                          {"restarts", opts.restarts},       {"refine_exponent", opts.refine_exponent}};
        doc["result"] = to_json(result, layout);
        doc["timing"] = {{"wall_seconds", seconds_since(t0)}};
        emit(cfg, dump(doc), out);
    }
    if (cfg.verbosity > 0)
        err << spec.name << ": objective " << result.objective << ", mu " << result.coherence << "\n";
    return kExitOk;
}

int cmd_rank(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto t0 = Clock::now();
    const auto files = spec_files(cfg.inputs);
    if (files.empty()) throw SpecError(cfg.inputs.empty() ? "rank" : cfg.inputs.front(), "no spec files to rank");
    const auto opts = minimize_options(cfg);
    std::vector<Candidate> candidates;
    for (const auto& f : files) {
        const auto spec = read_spec(f);
        // skip minimizing what the budget excludes anyway
        if (cfg.max_params && param_count(spec) > *cfg.max_params) {
            Candidate c;
            c.spec = spec;
            c.param_count = param_count(spec);
            candidates.push_back(std::move(c));
            continue;
        }
        if (cfg.verbosity > 0) err << "evaluating " << f << "\n";
        candidates.push_back(evaluate_candidate(spec, opts));
    }
    const auto report = rank(std::move(candidates), cfg.max_params);
    if (cfg.format == OutputFormat::csv) {
        std::ostringstream csv;
        csv << "name,params,score,mu\n" << std::setprecision(17);
        for (const auto& c : report.ranked)
            csv << c.spec.name << ',' << c.param_count << ',' << c.score() << ',' << c.result.coherence << '\n';
        emit(cfg, csv.str(), out);
    } else {
        json doc = header(cfg, "");
        json hashes = json::object();
        for (const auto& c : report.ranked) hashes[c.spec.name] = spec_hash(c.spec);
        doc["spec_hashes"] = std::move(hashes);
        doc["ranking"] = to_json(report);
        doc["timing"] = {{"wall_seconds", seconds_since(t0)}};
        emit(cfg, dump(doc), out);
    }
    return kExitOk;
}

int cmd_infer(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const auto t0 = Clock::now();
    const auto spec = read_spec(cfg.inputs.at(0));
    auto layout = std::make_shared<const FrameLayout>(make_layout(spec));
    const auto frame = build_global_frame(layout, params_for(*layout, cfg));
    const auto method = parse_method(cfg.method);
    if (!method) throw SpecError("--method", "unknown method '" + cfg.method + "' (feed_forward, layered_bp, bcd)");
    if (!(cfg.lambda >= 0.0)) throw SpecError("--lambda", "must be nonnegative");
    const int iters = cfg.iters > 0 ? cfg.iters : 100;

    Eigen::MatrixXd inputs;
    if (cfg.input_vectors.empty()) {
        Rng rng(mix_seed(cfg.seed, 0x1f));
        inputs.resize(1, spec.input_dim);
        for (Index c = 0; c < inputs.cols(); ++c) inputs(0, c) = rng.normal();
    } else {
        inputs = read_matrix(cfg.input_vectors);
        if (inputs.cols() != spec.input_dim)
            throw SpecError(cfg.input_vectors, "inputs have " + std::to_string(inputs.cols()) + " columns, expected " +
                                                   std::to_string(spec.input_dim));
    }
    const auto penalty = Penalty::uniform(spec.depth(), cfg.lambda);
    json results = json::array();
    std::ostringstream csv;
    csv << "input,method,objective,cycles\n" << std::setprecision(17);
    int status = kExitOk;
    for (Index r = 0; r < inputs.rows(); ++r) {
        const Eigen::VectorXd x = inputs.row(r).transpose();
        const auto res = infer(x, frame, penalty, *method, iters);
        if (res.flagged) status = kExitNumerical;
        results.push_back(to_json(res));
        csv << r << ',' << to_string(res.method) << ',' << res.objective << ',' << res.cycles << '\n';
    }
    if (cfg.format == OutputFormat::csv) {
        emit(cfg, csv.str(), out);
    } else {
        json doc = header(cfg, spec_hash(spec));
        doc["params_source"] = cfg.params.empty() ? "random" : "file";
        doc["inputs_source"] = cfg.input_vectors.empty() ? "random" : "file";
        doc["results"] = std::move(results);
        doc["timing"] = {{"wall_seconds", seconds_since(t0)}};
        emit(cfg, dump(doc), out);
    }
    return status;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Architecture-induced frames: potentials, coherence bounds, minimization and inference", kToolName};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    RunConfig cfg;
    std::string format = "json";

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "random seed (recorded in every output)");
        sub->add_option("--out", cfg.out, "output file (default stdout)");
        sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_flag("-v,--verbose", cfg.verbosity, "progress on stderr");
    };
    auto minimizing = [&](CLI::App* sub) {
        sub->add_option("--iters", cfg.iters, "maximum iterations per restart");
        sub->add_option("--restarts", cfg.restarts, "random restarts (best kept)");
        sub->add_option("--refine-exponent", cfg.refine_exponent, "second phase on sum |G|^p, 0 = off");
        sub->add_option("--threads", cfg.threads, "worker threads for restarts");
    };

    auto* validate = app.add_subcommand("validate", "check spec files or directories of specs");
    validate->add_option("specs", cfg.inputs, "spec files or directories")->required();
    common(validate);

    auto* analyze_cmd = app.add_subcommand("analyze", "coherence report for one architecture");
    analyze_cmd->add_option("spec", cfg.inputs, "spec file")->required()->expected(1);
    analyze_cmd->add_option("--params", cfg.params, "parameter file (default: seeded random)");
    analyze_cmd->add_option("--export-frame", cfg.export_frame, "write the normalized frame as a DFMAT001 container");
    common(analyze_cmd);

    auto* minimize = app.add_subcommand("minimize", "minimize the deep frame potential");
    minimize->add_option("spec", cfg.inputs, "spec file")->required()->expected(1);
    minimize->add_option("--trajectory", cfg.trajectory, "write the best restart's trajectory CSV here");
    common(minimize);
    minimizing(minimize);

    auto* rank_cmd = app.add_subcommand("rank", "rank a directory of specs by minimized potential");
    rank_cmd->add_option("dir", cfg.inputs, "directory of spec files")->required();
    rank_cmd->add_option("--max-params", cfg.max_params, "parameter budget");
    common(rank_cmd);
    minimizing(rank_cmd);

    auto* infer_cmd = app.add_subcommand("infer", "solve the deep frame approximation problem");
    infer_cmd->add_option("spec", cfg.inputs, "spec file")->required()->expected(1);
    infer_cmd->add_option("--params", cfg.params, "parameter file (default: seeded random)");
    infer_cmd->add_option("--inputs", cfg.input_vectors, "input vectors, one per row (CSV or DFMAT001)");
    infer_cmd->add_option("--method", cfg.method, "feed_forward, layered_bp or bcd");
    infer_cmd->add_option("--iters", cfg.iters, "BCD cycles or layered per-layer budget (default 100)");
    infer_cmd->add_option("--lambda", cfg.lambda, "penalty weight for every layer (default 0.1)");
    common(infer_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitInput;
    }
    cfg.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;

    try {
        for (auto* sub : app.get_subcommands()) {
            cfg.subcommand = sub->get_name();
            if (sub == validate) return cmd_validate(cfg, out, err);
            if (sub == analyze_cmd) return cmd_analyze(cfg, out, err);
            if (sub == minimize) return cmd_minimize(cfg, out, err);
            if (sub == rank_cmd) return cmd_rank(cfg, out, err);
            if (sub == infer_cmd) return cmd_infer(cfg, out, err);
        }
    } catch (const SpecError& e) {
        err << "error:\n";
        for (const auto& d : e.diagnostics()) err << "  " << d.location << ": " << d.message << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace deepframe
