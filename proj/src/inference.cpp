#include "deepframe/inference.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "deepframe/rng.hpp"

namespace deepframe {

namespace {

void check_penalty(const Penalty& penalty, Index depth) {
    if (static_cast<Index>(penalty.lambdas.size()) != depth)
        throw SpecError("lambda", "expected " + std::to_string(depth) + " penalty weights, got " +
                                      std::to_string(penalty.lambdas.size()));
    for (std::size_t j = 0; j < penalty.lambdas.size(); ++j)
        if (!(penalty.lambdas[j] >= 0.0) || !std::isfinite(penalty.lambdas[j]))
            throw SpecError("lambda/" + std::to_string(j), "penalty weight must be finite and nonnegative");
}

void check_input(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame) {
    const Index k0 = frame.layout().row_dims.front();
    if (x.size() != k0)
        throw SpecError("input", "input has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(k0));
}

// Rows of the global frame touched by column block j, stacked.
Eigen::MatrixXd column_block(const GlobalFrame& frame, Index j) {
    const auto& layout = frame.layout();
    const auto ids = layout.column_blocks(j);
    Index rows = 0;
    for (Index b : ids) rows += layout.blocks[static_cast<std::size_t>(b)].rows;
    Eigen::MatrixXd m(rows, layout.col_dims[static_cast<std::size_t>(j)]);
    Index off = 0;
    for (Index b : ids) {
        const auto& blk = frame.block_at(b);
        m.middleRows(off, blk.rows()) = blk;
        off += blk.rows();
    }
    return m;
}

Eigen::VectorXd stack(const Codes& codes) {
    Index n = 0;
    for (const auto& c : codes) n += c.size();
    Eigen::VectorXd out(n);
    Index off = 0;
    for (const auto& c : codes) {
        out.segment(off, c.size()) = c;
        off += c.size();
    }
    return out;
}

Eigen::VectorXd augmented_input(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame) {
    Eigen::VectorXd xa = Eigen::VectorXd::Zero(frame.rows());
    xa.head(x.size()) = x;
    return xa;
}

double penalty_value(const Codes& codes, const Penalty& penalty) {
    double p = 0.0;
    for (std::size_t j = 0; j < codes.size(); ++j) {
        if ((codes[j].array() < 0.0).any()) return std::numeric_limits<double>::infinity();
        p += penalty.lambdas[j] * codes[j].sum();
    }
    return p;
}

std::vector<double> sparsity(const Codes& codes) {
    std::vector<double> out;
    for (const auto& c : codes)
        out.push_back(c.size() ? static_cast<double>((c.array() == 0.0).count()) / static_cast<double>(c.size()) : 0.0);
    return out;
}

}  // namespace

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::feed_forward: return "feed_forward";
        case Method::layered_bp: return "layered_bp";
        case Method::bcd: return "bcd";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view text) noexcept {
    std::string t(text);
    for (auto& ch : t)
        if (ch == '-') ch = '_';
    if (t == "feed_forward") return Method::feed_forward;
    if (t == "layered_bp") return Method::layered_bp;
    if (t == "bcd") return Method::bcd;
    return std::nullopt;
}

Penalty Penalty::uniform(Index depth, double lambda) {
    return Penalty{std::vector<double>(static_cast<std::size_t>(depth), lambda)};
}

Eigen::VectorXd prox_nonneg_soft_threshold(const Eigen::Ref<const Eigen::VectorXd>& v, double lambda) {
    if (!(lambda >= 0.0)) throw SpecError("lambda", "threshold must be nonnegative");
    return (v.array() - lambda).max(0.0).matrix();
}

double largest_squared_singular_value(const Eigen::Ref<const Eigen::MatrixXd>& m, int iterations, double tolerance) {
    if (m.cols() == 0 || m.rows() == 0) return 0.0;
    Rng rng(0x5eed);
    Eigen::VectorXd v(m.cols());
    for (Index n = 0; n < v.size(); ++n) v[n] = rng.normal();
    v.normalize();
    double est = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = m.transpose() * (m * v);
        const double next = v.dot(w);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const bool done = it > 0 && std::abs(next - est) <= tolerance * std::abs(next);
        est = next;
        if (done) break;
    }
    // Rayleigh quotient at the final iterate
    return std::max(est, (m * v).squaredNorm());
}

double shallow_objective(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& b,
                         const Eigen::Ref<const Eigen::VectorXd>& w, double lambda) {
    if ((w.array() < 0.0).any()) return std::numeric_limits<double>::infinity();
    return 0.5 * (x - b * w).squaredNorm() + lambda * w.sum();
}

IstaResult shallow_ista(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& b,
                        double lambda, double step, int iterations, const Eigen::VectorXd& w0) {
    if (b.rows() != x.size()) throw SpecError("input", "dictionary rows do not match the input dimension");
    if (iterations < 1) throw SpecError("iters", "need at least one iteration");
    if (!(lambda >= 0.0)) throw SpecError("lambda", "must be nonnegative");
    IstaResult r;
    r.step = step > 0.0 ? step : 1.0 / std::max(largest_squared_singular_value(b), std::numeric_limits<double>::min());
    r.code = w0.size() ? w0 : Eigen::VectorXd::Zero(b.cols());
    if (r.code.size() != b.cols()) throw SpecError("init", "initial code has the wrong dimension");
    r.trajectory.push_back(shallow_objective(x, b, r.code, lambda));
    for (int t = 0; t < iterations; ++t) {
        const Eigen::VectorXd grad = b.transpose() * (b * r.code - x);
        r.code = prox_nonneg_soft_threshold(r.code - r.step * grad, r.step * lambda);
        r.trajectory.push_back(shallow_objective(x, b, r.code, lambda));
        if (!std::isfinite(r.trajectory.back()))
            throw NumericalError("ISTA objective is not finite at step " + std::to_string(t + 1));
        const double prev = r.trajectory[r.trajectory.size() - 2];
        if (r.trajectory.back() > prev + 1e-12 * std::max(1.0, std::abs(prev))) r.increased = true;
    }
    return r;
}

double objective_value(const Codes& codes, const GlobalFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Penalty& penalty) {
    check_input(x, frame);
    check_penalty(penalty, frame.depth());
    if (static_cast<Index>(codes.size()) != frame.depth()) throw SpecError("codes", "one code per layer required");
    for (Index j = 0; j < frame.depth(); ++j)
        if (codes[static_cast<std::size_t>(j)].size() != frame.layout().col_dims[static_cast<std::size_t>(j)])
            throw SpecError("codes/" + std::to_string(j), "code has the wrong dimension");
    const double pen = penalty_value(codes, penalty);
    if (!std::isfinite(pen)) return pen;
    return 0.5 * (augmented_input(x, frame) - frame.apply(stack(codes))).squaredNorm() + pen;
}

Codes feed_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame, const Penalty& penalty) {
    check_input(x, frame);
    check_penalty(penalty, frame.depth());
    const auto& layout = frame.layout();
    Codes codes;
    for (Index j = 0; j < frame.depth(); ++j) {
        Eigen::VectorXd target = j == 0 ? Eigen::VectorXd(x) : Eigen::VectorXd::Zero(layout.row_dims[static_cast<std::size_t>(j)]);
        for (Index b : layout.row_blocks(j)) {
            const auto& blk = layout.blocks[static_cast<std::size_t>(b)];
            if (blk.col < j) target.noalias() -= frame.block_at(b) * codes[static_cast<std::size_t>(blk.col)];
        }
        codes.push_back(prox_nonneg_soft_threshold(frame.block(j, j).transpose() * target,
                                                   penalty.lambdas[static_cast<std::size_t>(j)]));
    }
    return codes;
}

Codes layered_basis_pursuit(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame,
                            const Penalty& penalty, int budget) {
    if (frame.depth() > 1 && frame.spec().connectivity.pattern != Pattern::chain)
        throw SpecError("method", "layered basis pursuit is only defined for chain connectivity");
    check_input(x, frame);
    check_penalty(penalty, frame.depth());
    Codes codes;
    Eigen::VectorXd input = x;
    for (Index j = 0; j < frame.depth(); ++j) {
        auto r = shallow_ista(input, frame.block(j, j), penalty.lambdas[static_cast<std::size_t>(j)], 0.0, budget);
        codes.push_back(r.code);
        input = codes.back();
    }
    return codes;
}

InferenceResult bcd_inference(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame,
                              const Penalty& penalty, const BcdOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    check_input(x, frame);
    check_penalty(penalty, frame.depth());
    if (opts.cycles < 1) throw SpecError("iters", "need at least one cycle");
    if (!(opts.momentum >= 0.0 && opts.momentum < 1.0)) throw SpecError("momentum", "must lie in [0, 1)");
    const auto& layout = frame.layout();
    const Index l = frame.depth();
    const bool explicit_steps = !opts.steps.empty();
    if (explicit_steps && static_cast<Index>(opts.steps.size()) != l)
        throw SpecError("steps", "expected one step size per layer");

    InferenceResult out;
    out.method = Method::bcd;
    out.lambdas = penalty.lambdas;

    std::vector<double> lip(static_cast<std::size_t>(l));
    for (Index j = 0; j < l; ++j) {
        if (explicit_steps) {
            const double g = opts.steps[static_cast<std::size_t>(j)];
            if (!(g > 0.0)) throw SpecError("steps/" + std::to_string(j), "step size must be positive");
            lip[static_cast<std::size_t>(j)] = 1.0 / g;
        } else {
            lip[static_cast<std::size_t>(j)] =
                std::max(largest_squared_singular_value(column_block(frame, j)), std::numeric_limits<double>::min());
        }
    }

    Codes w;
    if (opts.feed_forward_init) {
        w = feed_forward(x, frame, penalty);
    } else {
        for (Index j = 0; j < l; ++j) w.push_back(Eigen::VectorXd::Zero(layout.col_dims[static_cast<std::size_t>(j)]));
    }
    Codes prev = w;
    const Eigen::VectorXd xa = augmented_input(x, frame);

    // residual rows r_i = (B w - x_aug)_i
    std::vector<Eigen::VectorXd> r(static_cast<std::size_t>(l));
    auto refresh = [&] {
        const Eigen::VectorXd full = frame.apply(stack(w)) - xa;
        for (Index i = 0; i < l; ++i)
            r[static_cast<std::size_t>(i)] =
                full.segment(layout.row_offset(i), layout.row_dims[static_cast<std::size_t>(i)]);
    };
    auto objective = [&] {
        double f = 0.0;
        for (const auto& ri : r) f += 0.5 * ri.squaredNorm();
        return f + penalty_value(w, penalty);
    };

    refresh();
    out.trajectory.push_back(objective());
    for (int cycle = 1; cycle <= opts.cycles; ++cycle) {
        for (Index j = 0; j < l; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const auto ids = layout.column_blocks(j);
            auto shift = [&](const Eigen::VectorXd& delta) {
                for (Index b : ids)
                    r[static_cast<std::size_t>(layout.blocks[static_cast<std::size_t>(b)].row)].noalias() +=
                        frame.block_at(b) * delta;
            };
            if (opts.momentum > 0.0 && cycle > 1) {
                const Eigen::VectorXd ext = opts.momentum * (w[ju] - prev[ju]);
                prev[ju] = w[ju];
                w[ju] += ext;
                shift(ext);
            } else {
                prev[ju] = w[ju];
            }
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(w[ju].size());
            double smooth = 0.0;
            for (Index b : ids) {
                const auto& ri = r[static_cast<std::size_t>(layout.blocks[static_cast<std::size_t>(b)].row)];
                grad.noalias() += frame.block_at(b).transpose() * ri;
                smooth += 0.5 * ri.squaredNorm();
            }
            const double lambda = penalty.lambdas[ju];
            for (;;) {
                const double gamma = 1.0 / lip[ju];
                Eigen::VectorXd next = prox_nonneg_soft_threshold(w[ju] - gamma * grad, gamma * lambda);
                Eigen::VectorXd delta = next - w[ju];
                if (!explicit_steps) {
                    double smooth_new = 0.0;
                    for (Index b : ids) {
                        const auto& ri = r[static_cast<std::size_t>(layout.blocks[static_cast<std::size_t>(b)].row)];
                        smooth_new += 0.5 * (ri + frame.block_at(b) * delta).squaredNorm();
                    }
                    const double model = smooth + grad.dot(delta) + 0.5 * lip[ju] * delta.squaredNorm();
                    if (smooth_new > model + 1e-14 * std::max(1.0, std::abs(smooth)) && lip[ju] < 1e300) {
                        lip[ju] *= 2.0;
                        continue;
                    }
                }
                shift(delta);
                w[ju] = std::move(next);
                break;
            }
        }
        refresh();
        const double f = objective();
        if (!std::isfinite(f)) throw NumericalError("BCD objective is not finite at cycle " + std::to_string(cycle));
        if (f > out.trajectory.back() + 1e-10 * std::max(1.0, std::abs(out.trajectory.back())) && !out.flagged) {
            out.flagged = true;
            out.message = "objective increased at cycle " + std::to_string(cycle);
        }
        const double last = out.trajectory.back();
        out.trajectory.push_back(f);
        out.cycles = cycle;
        if (opts.tolerance > 0.0 && std::abs(last - f) <= opts.tolerance * std::max(std::abs(f), 1e-300)) break;
    }
    out.codes = w;
    out.objective = out.trajectory.back();
    out.sparsity = sparsity(w);
    for (double L : lip) out.step_sizes.push_back(1.0 / L);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

InferenceResult infer(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame, const Penalty& penalty,
                      Method method, int iterations) {
    if (method == Method::bcd) {
        BcdOptions opts;
        opts.cycles = iterations;
        return bcd_inference(x, frame, penalty, opts);
    }
    const auto start = std::chrono::steady_clock::now();
    InferenceResult out;
    out.method = method;
    out.lambdas = penalty.lambdas;
    if (method == Method::feed_forward) {
        out.codes = feed_forward(x, frame, penalty);
        out.cycles = 1;
    } else {
        if (iterations < 1) throw SpecError("iters", "need at least one iteration");
        out.codes = layered_basis_pursuit(x, frame, penalty, iterations);
        out.cycles = iterations;
    }
    out.objective = objective_value(out.codes, frame, x, penalty);
    out.trajectory.push_back(out.objective);
    out.sparsity = sparsity(out.codes);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace deepframe
