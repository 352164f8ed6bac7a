#include "deepframe/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace deepframe {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary container assumes a little-endian host");

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<std::int64_t> param_shape(const BlockLayout& b) {
    if (b.kind == BlockKind::conv) {
        const auto& g = b.stencil->geometry;
        if (g.dims == 1) return {b.stencil->filters, g.channels, g.filter};
        return {b.stencil->filters, g.channels, g.filter, g.filter};
    }
    if (b.diagonal()) return {b.rows, b.cols};
    return {b.cols, b.rows};
}

std::string block_name(const BlockLayout& b) {
    return "(" + std::to_string(b.row) + "," + std::to_string(b.col) + ")";
}

}  // namespace

void write_matrix_binary(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m) {
    out.write(kMatrixMagic, 8);
    const std::array<std::uint64_t, 2> dims{static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    out.write(reinterpret_cast<const char*>(dims.data()), sizeof(dims));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
    if (!out) throw SpecError("output", "failed to write matrix container");
}

void write_matrix_binary(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError(path, "cannot open for writing");
    write_matrix_binary(out, m);
}

Eigen::MatrixXd read_matrix_binary(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMatrixMagic, 8) != 0)
        throw SpecError("container", "missing DFMAT001 header");
    std::array<std::uint64_t, 2> dims{};
    if (!in.read(reinterpret_cast<char*>(dims.data()), sizeof(dims))) throw SpecError("container", "truncated header");
    if (dims[0] > (1u << 24) || dims[1] > (1u << 24) || dims[0] * dims[1] > (1ull << 28))
        throw SpecError("container", "implausible dimensions");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(static_cast<Index>(dims[0]),
                                                                             static_cast<Index>(dims[1]));
    if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size())))
        throw SpecError("container", "truncated data: expected " + std::to_string(dims[0]) + "x" +
                                         std::to_string(dims[1]) + " values");
    return rm;
}

Eigen::MatrixXd read_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError(path, "cannot open");
    return read_matrix_binary(in);
}

void write_matrix_csv(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

Eigen::MatrixXd read_matrix_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw SpecError("line " + std::to_string(lineno), "not a number: '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw SpecError("line " + std::to_string(lineno), "expected " + std::to_string(rows.front().size()) +
                                                                   " values, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

Eigen::MatrixXd read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError(path, "cannot open");
    char magic[8] = {};
    in.read(magic, 8);
    in.clear();
    in.seekg(0);
    try {
        if (std::memcmp(magic, kMatrixMagic, 8) == 0) return read_matrix_binary(in);
        return read_matrix_csv(in);
    } catch (const SpecError& e) {
        std::vector<Diagnostic> d = e.diagnostics();
        for (auto& x : d) x.location = path + ": " + x.location;
        throw SpecError(std::move(d));
    }
}

json params_to_json(const FrameLayout& layout, const FrameParams& params) {
    if (params.values.size() != layout.param_count) throw SpecError("params", "parameter count mismatch");
    json blocks = json::array();
    for (const auto& b : layout.blocks) {
        if (b.kind == BlockKind::identity) continue;
        json values = json::array();
        if (b.kind == BlockKind::conv) {
            for (Index n = 0; n < b.param_count; ++n) values.push_back(params.values[b.param_offset + n]);
        } else {
            // stored column-major, written row-major
            const auto shape = param_shape(b);
            Eigen::Map<const Eigen::MatrixXd> m(params.values.data() + b.param_offset, shape[0], shape[1]);
            for (Index r = 0; r < m.rows(); ++r)
                for (Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
        }
        blocks.push_back({{"to", b.row},
                          {"from", b.col},
                          {"kind", b.kind == BlockKind::conv ? "conv" : "dense"},
                          {"shape", param_shape(b)},
                          {"values", std::move(values)}});
    }
    return {{"format", "deepframe-params/1"}, {"spec_hash", spec_hash(layout.spec)}, {"blocks", std::move(blocks)}};
}

FrameParams params_from_json(const FrameLayout& layout, const json& doc) {
    std::vector<Diagnostic> diags;
    if (!doc.is_object() || doc.value("format", "") != "deepframe-params/1")
        throw SpecError("/format", "expected \"deepframe-params/1\"");
    if (!doc.contains("blocks") || !doc["blocks"].is_array()) throw SpecError("/blocks", "missing block list");
    FrameParams params;
    params.values = Eigen::VectorXd::Zero(layout.param_count);
    std::vector<bool> seen(layout.blocks.size(), false);
    for (std::size_t n = 0; n < doc["blocks"].size(); ++n) {
        const auto& e = doc["blocks"][n];
        const std::string loc = "/blocks/" + std::to_string(n);
        try {
            const Index to = e.at("to").get<Index>();
            const Index from = e.at("from").get<Index>();
            const Index idx = layout.find(to, from);
            if (idx < 0 || layout.blocks[static_cast<std::size_t>(idx)].kind == BlockKind::identity) {
                diags.push_back({loc, "no learned block (" + std::to_string(to) + "," + std::to_string(from) + ")"});
                continue;
            }
            const auto& b = layout.blocks[static_cast<std::size_t>(idx)];
            if (seen[static_cast<std::size_t>(idx)]) {
                diags.push_back({loc, "duplicate block " + block_name(b)});
                continue;
            }
            seen[static_cast<std::size_t>(idx)] = true;
            const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
            if (shape != param_shape(b)) {
                diags.push_back({loc + "/shape", "shape mismatch for block " + block_name(b)});
                continue;
            }
            const auto values = e.at("values").get<std::vector<double>>();
            if (static_cast<Index>(values.size()) != b.param_count) {
                diags.push_back({loc + "/values", "expected " + std::to_string(b.param_count) + " values"});
                continue;
            }
            if (b.kind == BlockKind::conv) {
                for (Index k = 0; k < b.param_count; ++k) params.values[b.param_offset + k] = values[static_cast<std::size_t>(k)];
            } else {
                Eigen::Map<Eigen::MatrixXd> m(params.values.data() + b.param_offset, shape[0], shape[1]);
                for (Index r = 0; r < m.rows(); ++r)
                    for (Index c = 0; c < m.cols(); ++c) m(r, c) = values[static_cast<std::size_t>(r * m.cols() + c)];
            }
        } catch (const json::exception& ex) {
            diags.push_back({loc, ex.what()});
        }
    }
    for (std::size_t b = 0; b < layout.blocks.size(); ++b)
        if (!seen[b] && layout.blocks[b].kind != BlockKind::identity)
            diags.push_back({"/blocks", "missing block " + block_name(layout.blocks[b])});
    if (!diags.empty()) throw SpecError(std::move(diags));
    return params;
}

FrameParams load_params(const FrameLayout& layout, const std::string& path) {
    try {
        return params_from_json(layout, json::parse(read_text_file(path)));
    } catch (const json::exception& e) {
        throw SpecError(path, e.what());
    } catch (const SpecError& e) {
        std::vector<Diagnostic> d = e.diagnostics();
        for (auto& x : d) x.location = path + ":" + x.location;
        throw SpecError(std::move(d));
    }
}

json to_json(const CoherenceReport& r) {
    return {{"name", r.name},
            {"rows", r.rows},
            {"cols", r.cols},
            {"param_count", r.param_count},
            {"normalized", r.normalized},
            {"frame_potential", r.frame_potential},
            {"trace", r.trace},
            {"offdiag_count", r.offdiag_count},
            {"deep_frame_potential", optional_number(r.deep_frame_potential)},
            {"averaged_bound", optional_number(r.averaged_bound)},
            {"mutual_coherence", r.mutual_coherence},
            {"welch_bound", optional_number(r.welch_bound)},
            {"conv_welch_bound", optional_number(r.conv_welch_bound)},
            {"chain_lower_bound", optional_number(r.chain_lower_bound)},
            {"sparsity_thresholds",
             {{"unbounded", r.thresholds.unbounded},
              {"uniqueness", finite_or_null(r.thresholds.uniqueness)},
              {"bp_recovery", finite_or_null(r.thresholds.bp_recovery)},
              {"stability", finite_or_null(r.thresholds.stability)}}}};
}

json to_json(const MinResult& r, const FrameLayout& layout) {
    json restarts = json::array();
    for (const auto& run : r.restarts) {
        json entry = {{"seed", run.seed}, {"failed", run.failed}, {"iterations", run.iterations}};
        if (run.failed)
            entry["message"] = run.message;
        else {
            entry["objective"] = run.objective;
            entry["mutual_coherence"] = run.coherence;
        }
        restarts.push_back(std::move(entry));
    }
    return {{"objective", r.objective},
            {"frame_potential", r.frame_potential},
            {"mutual_coherence", r.coherence},
            {"offdiag_count", r.offdiag_count},
            {"iterations", r.iterations},
            {"best_restart", r.best_restart},
            {"restarts", std::move(restarts)},
            {"params", params_to_json(layout, r.params)}};
}

json to_json(const InferenceResult& r) {
    json codes = json::array();
    for (const auto& c : r.codes) codes.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    json out = {{"method", std::string(to_string(r.method))},
                {"objective", r.objective},
                {"trajectory", r.trajectory},
                {"cycles", r.cycles},
                {"lambda", r.lambdas},
                {"sparsity", r.sparsity},
                {"codes", std::move(codes)},
                {"flagged", r.flagged}};
    if (!r.step_sizes.empty()) out["step_sizes"] = r.step_sizes;
    if (!r.message.empty()) out["message"] = r.message;
    return out;
}

json to_json(const RankingReport& r) {
    json ranked = json::array();
    int position = 1;
    for (const auto& c : r.ranked) {
        ranked.push_back({{"rank", position++},
                          {"name", c.spec.name},
                          {"spec_hash", spec_hash(c.spec)},
                          {"param_count", c.param_count},
                          {"score", c.score()},
                          {"mutual_coherence", c.result.coherence},
                          {"iterations", c.result.iterations},
                          {"report", to_json(c.report)}});
    }
    return {{"constraint", r.constraint()},
            {"max_params", r.max_params ? json(*r.max_params) : json(nullptr)},
            {"excluded", r.excluded},
            {"ranked", std::move(ranked)}};
}

std::string report_csv_header() {
    return "name,rows,cols,param_count,frame_potential,trace,offdiag_count,deep_frame_potential,averaged_bound,"
           "mutual_coherence,welch_bound,chain_lower_bound";
}

std::string report_csv_row(const CoherenceReport& r) {
    std::ostringstream out;
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    auto opt = [&](const std::optional<double>& v) {
        out << ',';
        if (v) out << *v;
    };
    out << r.name << ',' << r.rows << ',' << r.cols << ',' << r.param_count << ',' << r.frame_potential << ','
        << r.trace << ',' << r.offdiag_count;
    opt(r.deep_frame_potential);
    opt(r.averaged_bound);
    out << ',' << r.mutual_coherence;
    opt(r.welch_bound);
    opt(r.chain_lower_bound);
    return out.str();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError(path, "cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError(path, "cannot open for writing");
    out << text;
    if (!out) throw SpecError(path, "write failed");
}

}  // namespace deepframe
