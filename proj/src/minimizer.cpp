#include "deepframe/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "deepframe/gram.hpp"
#include "deepframe/rng.hpp"

namespace deepframe {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-20;
constexpr double kMaxStep = 1e6;
constexpr double kFloor = 1e-16;

PotentialValue evaluate(const FrameLayout& layout, std::int64_t count, const FrameParams& params, double exponent,
                        bool with_gradient) {
    if (params.values.size() != layout.param_count) throw SpecError("params", "parameter count mismatch");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(layout.total_rows(), layout.total_cols());
    for (const auto& b : layout.blocks)
        a.block(layout.row_offset(b.row), layout.col_offset(b.col), b.rows, b.cols) = block_matrix(b, params);
    const Eigen::VectorXd norms = a.colwise().norm().transpose();
    for (Index c = 0; c < norms.size(); ++c)
        if (!(norms[c] > 0.0)) throw NumericalError("zero-norm column " + std::to_string(c) + " of the global frame");
    const Eigen::VectorXd inv = norms.cwiseInverse();
    const Eigen::MatrixXd bn = a * inv.asDiagonal();
    Eigen::MatrixXd g = bn.transpose() * bn;
    g.diagonal().setZero();
    const double n = count > 0 ? static_cast<double>(count) : 1.0;

    PotentialValue out;
    out.coherence = std::min(g.cwiseAbs().maxCoeff(), 1.0);
    Eigen::MatrixXd d;
    if (exponent == 2.0) {
        out.objective = g.squaredNorm() / n;
        if (with_gradient) d = (2.0 / n) * g;
    } else {
        const Eigen::ArrayXXd mag = g.array().abs();
        out.objective = mag.pow(exponent).sum() / n;
        if (with_gradient) d = ((exponent / n) * mag.pow(exponent - 1.0) * g.array().sign()).matrix();
    }
    if (!with_gradient) return out;

    // d/dBn = 2 Bn D, then back through the column normalization.
    const Eigen::MatrixXd gbn = 2.0 * bn * d;
    Eigen::MatrixXd ga(a.rows(), a.cols());
    for (Index c = 0; c < a.cols(); ++c)
        ga.col(c) = (gbn.col(c) - bn.col(c) * bn.col(c).dot(gbn.col(c))) * inv[c];

    out.gradient = Eigen::VectorXd::Zero(layout.param_count);
    for (const auto& b : layout.blocks) {
        if (b.param_count == 0) continue;
        out.gradient.segment(b.param_offset, b.param_count) = block_param_gradient(
            b, ga.block(layout.row_offset(b.row), layout.col_offset(b.col), b.rows, b.cols));
    }
    return out;
}

// One gradient-descent run on a fixed exponent. Returns false when the
// objective became NaN.
bool descend(const FrameLayout& layout, std::int64_t count, const MinimizeOptions& opts, double exponent, FrameParams& x,
             std::vector<TracePoint>* trace, int& iterations, std::string& message) {
    PotentialValue cur = evaluate(layout, count, x, exponent, true);
    if (!std::isfinite(cur.objective) || !cur.gradient.allFinite()) {
        message = "objective is not finite at the starting point";
        return false;
    }
    std::vector<double> history{cur.objective};
    if (trace) trace->push_back({iterations, cur.objective, cur.coherence});
    double step = opts.step;
    for (int it = 0; it < opts.max_iters; ++it) {
        const double gsq = cur.gradient.squaredNorm();
        if (cur.objective <= kFloor || gsq == 0.0) break;
        FrameParams trial;
        PotentialValue next;
        bool accepted = false;
        while (step >= kMinStep) {
            trial.values = x.values - step * cur.gradient;
            try {
                next = evaluate(layout, count, trial, exponent, true);
            } catch (const NumericalError&) {
                step *= 0.5;
                continue;
            }
            if (std::isfinite(next.objective) && next.objective <= cur.objective - kArmijo * step * gsq) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        if (!next.gradient.allFinite()) {
            message = "gradient is not finite at iteration " + std::to_string(iterations + 1);
            return false;
        }
        const Eigen::VectorXd s = trial.values - x.values;
        const Eigen::VectorXd y = next.gradient - cur.gradient;
        const double sy = s.dot(y);
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, kMinStep, kMaxStep) : std::min(2.0 * step, kMaxStep);
        x = std::move(trial);
        cur = std::move(next);
        ++iterations;
        history.push_back(cur.objective);
        if (trace) trace->push_back({iterations, cur.objective, cur.coherence});
        const auto n = history.size();
        if (n > static_cast<std::size_t>(opts.window)) {
            const double old = history[n - 1 - static_cast<std::size_t>(opts.window)];
            if (old - cur.objective <= opts.tolerance * std::max(std::abs(cur.objective), kFloor)) break;
        }
    }
    return true;
}

RestartResult run_restart(const FrameLayout& layout, std::int64_t count, const MinimizeOptions& opts, int index) {
    RestartResult r;
    r.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(index));
    r.params = random_params(layout, r.seed);
    try {
        if (!descend(layout, count, opts, 2.0, r.params, &r.trajectory, r.iterations, r.message)) {
            r.failed = true;
            return r;
        }
        if (opts.refine_exponent > 2.0) {
            FrameParams refined = r.params;
            int extra = 0;
            std::string msg;
            if (descend(layout, count, opts, opts.refine_exponent, refined, nullptr, extra, msg)) {
                r.params = std::move(refined);
                r.iterations += extra;
            }
        }
        const auto v = evaluate(layout, count, r.params, 2.0, false);
        r.objective = v.objective;
        r.coherence = v.coherence;
        if (!std::isfinite(r.objective)) {
            r.failed = true;
            r.message = "objective is not finite";
        } else if (opts.refine_exponent > 2.0) {
            r.trajectory.push_back({r.iterations, r.objective, r.coherence});
        }
    } catch (const NumericalError& e) {
        r.failed = true;
        r.message = e.what();
    }
    return r;
}

}  // namespace

void check_options(const MinimizeOptions& opts) {
    std::vector<Diagnostic> diags;
    if (opts.max_iters <= 0) diags.push_back({"max_iters", "must be positive"});
    if (!(opts.step > 0.0) || !std::isfinite(opts.step)) diags.push_back({"step", "must be positive"});
    if (!(opts.tolerance > 0.0)) diags.push_back({"tolerance", "must be positive"});
    if (opts.window <= 0) diags.push_back({"window", "must be positive"});
    if (opts.restarts < 1) diags.push_back({"restarts", "must be at least 1"});
    if (opts.threads < 1) diags.push_back({"threads", "must be at least 1"});
    if (opts.refine_exponent != 0.0 && !(opts.refine_exponent > 2.0))
        diags.push_back({"refine_exponent", "must be 0 (off) or greater than 2"});
    if (!diags.empty()) throw SpecError(std::move(diags));
}

PotentialValue evaluate_potential(const FrameLayout& layout, const FrameParams& params, double exponent,
                                  bool with_gradient) {
    return evaluate(layout, structural_offdiag_count(layout), params, exponent, with_gradient);
}

Eigen::VectorXd potential_gradient(const FrameLayout& layout, const FrameParams& params, double exponent) {
    return evaluate_potential(layout, params, exponent, true).gradient;
}

MinResult minimize_deep_frame_potential(const ArchitectureSpec& spec, const MinimizeOptions& opts) {
    check_options(opts);
    const FrameLayout layout = make_layout(spec);
    if (layout.param_count == 0) throw SpecError("spec", "architecture has no learnable parameters");
    const std::int64_t count = structural_offdiag_count(layout);

    std::vector<RestartResult> runs(static_cast<std::size_t>(opts.restarts));
    const int workers = std::min(opts.threads, opts.restarts);
    if (workers <= 1) {
        for (int r = 0; r < opts.restarts; ++r) runs[static_cast<std::size_t>(r)] = run_restart(layout, count, opts, r);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int r = w; r < opts.restarts; r += workers)
                    runs[static_cast<std::size_t>(r)] = run_restart(layout, count, opts, r);
            });
        }
        for (auto& t : pool) t.join();
    }

    int best = -1;
    for (int r = 0; r < opts.restarts; ++r) {
        const auto& run = runs[static_cast<std::size_t>(r)];
        if (run.failed) continue;
        if (best < 0 || run.objective < runs[static_cast<std::size_t>(best)].objective) best = r;
    }
    if (best < 0) {
        std::string why;
        for (int r = 0; r < opts.restarts; ++r)
            why += "\n  restart " + std::to_string(r) + ": " + runs[static_cast<std::size_t>(r)].message;
        throw NumericalError("all restarts failed:" + why);
    }

    MinResult out;
    const auto& winner = runs[static_cast<std::size_t>(best)];
    out.best_restart = best;
    out.objective = winner.objective;
    out.coherence = winner.coherence;
    out.iterations = winner.iterations;
    out.params = winner.params;
    out.offdiag_count = count;
    out.frame_potential = winner.objective * static_cast<double>(std::max<std::int64_t>(out.offdiag_count, 1)) +
                          static_cast<double>(layout.total_cols());
    out.restarts = std::move(runs);
    return out;
}

}  // namespace deepframe
