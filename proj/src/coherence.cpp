#include "deepframe/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace deepframe {

namespace {

double max_offdiag(const GramStructure& g) {
    double mu = 0.0;
    for (const auto& b : g.blocks) {
        for (Index c = 0; c < b.value.cols(); ++c)
            for (Index r = 0; r < b.value.rows(); ++r)
                if (b.row != b.col || r != c) mu = std::max(mu, std::abs(b.value(r, c)));
    }
    return mu;
}

}  // namespace

double frame_potential(const Eigen::Ref<const Eigen::MatrixXd>& frame) {
    return (frame.transpose() * frame).squaredNorm();
}

double frame_potential(const GlobalFrame& frame) { return gram(frame).frobenius_sq; }

double mutual_coherence(const Eigen::Ref<const Eigen::MatrixXd>& frame) {
    if (frame.cols() < 2) throw SpecError("frame", "mutual coherence needs at least two columns");
    Eigen::VectorXd norms = frame.colwise().norm().transpose();
    for (Index c = 0; c < norms.size(); ++c)
        if (!(norms[c] > 0.0)) throw SpecError("frame", "zero column " + std::to_string(c));
    const Eigen::MatrixXd unit = frame * norms.cwiseInverse().asDiagonal();
    Eigen::MatrixXd g = (unit.transpose() * unit).cwiseAbs();
    g.diagonal().setZero();
    return std::min(g.maxCoeff(), 1.0);
}

double mutual_coherence(const GlobalFrame& frame) {
    if (frame.cols() < 2) throw SpecError("frame", "mutual coherence needs at least two columns");
    return std::min(max_offdiag(gram(normalize(frame).frame)), 1.0);
}

std::optional<double> averaged_potential_bound(double frame_potential, double trace, std::int64_t offdiag_count) {
    if (offdiag_count <= 0) return std::nullopt;
    return std::sqrt(std::max(frame_potential - trace, 0.0) / static_cast<double>(offdiag_count));
}

double welch_bound(Index d, Index k) {
    if (k < 2) throw SpecError("welch", "needs k >= 2, got k=" + std::to_string(k));
    if (d <= 0) throw SpecError("welch", "needs d >= 1");
    if (k <= d) return 0.0;
    const double kd = static_cast<double>(k) / static_cast<double>(d);
    return std::sqrt((kd - 1.0) / (static_cast<double>(k) - 1.0));
}

double conv_welch_bound(Index p, Index s, Index f, Index d, Index k) {
    if (p <= 0 || s <= 0 || f <= 0 || d <= 0 || k <= 0) throw SpecError("conv", "degenerate convolution geometry");
    const Index o = (f + s - 1) / s;
    const double kd = static_cast<double>(k), dd = static_cast<double>(d), sd = static_cast<double>(s);
    const double num = kd / (dd * sd * sd) - 1.0;
    const double spread = (2.0 - static_cast<double>((o - 1) * s) / static_cast<double>(p)) * static_cast<double>(o) - 1.0;
    const double den = kd * spread * spread - 1.0;
    if (num <= 0.0 || den <= 0.0) return 0.0;
    return std::sqrt(num / den);
}

double conv_welch_limit(Index f, Index d, Index k) {
    if (f <= 0 || d <= 0 || k <= 0) throw SpecError("conv", "degenerate convolution geometry");
    const double kd = static_cast<double>(k);
    const double w = 2.0 * static_cast<double>(f) - 1.0;
    const double num = kd / static_cast<double>(d) - 1.0;
    const double den = kd * w * w - 1.0;
    if (num <= 0.0 || den <= 0.0) return 0.0;
    return std::sqrt(num / den);
}

double chain_lower_bound(const std::vector<Index>& dims, const std::vector<Eigen::VectorXd>& magnitudes) {
    const std::size_t l = magnitudes.size();
    if (l == 0 || dims.size() != l + 1) throw SpecError("chain", "need l magnitude vectors and l+1 dims");
    for (std::size_t j = 0; j < l; ++j) {
        if (magnitudes[j].size() != dims[j + 1])
            throw SpecError("chain", "layer " + std::to_string(j) + " has " + std::to_string(magnitudes[j].size()) +
                                         " magnitudes, expected " + std::to_string(dims[j + 1]));
        if ((magnitudes[j].array() < 0.0).any() || (j + 1 == l && (magnitudes[j].array() <= 0.0).any()))
            throw SpecError("chain", "invalid column magnitude in layer " + std::to_string(j));
    }
    double bound = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
        const Eigen::ArrayXd c2 = magnitudes[j].array().square();
        // squared column norm of the diagonal block after normalization
        const double own = j + 1 < l ? (c2 / (c2 + 1.0)).sum() : static_cast<double>(c2.size());
        const double below = j > 0 ? (1.0 / (magnitudes[j - 1].array().square() + 1.0)).sum() : 0.0;
        const double tr = own + below;
        bound += tr * tr / static_cast<double>(dims[j]);
        if (j + 1 < l) bound += 2.0 * (magnitudes[j].array() / (c2 + 1.0)).square().sum();
    }
    return bound;
}

double chain_lower_bound(const GlobalFrame& raw) {
    if (raw.depth() > 1 && raw.spec().connectivity.pattern != Pattern::chain)
        throw SpecError("connectivity", "chain lower bound requires chain connectivity");
    std::vector<Index> dims{raw.layout().row_dims.front()};
    std::vector<Eigen::VectorXd> mags;
    for (Index j = 0; j < raw.depth(); ++j) {
        dims.push_back(raw.layout().col_dims[static_cast<std::size_t>(j)]);
        mags.push_back(raw.block(j, j).colwise().norm().transpose());
    }
    return chain_lower_bound(dims, mags);
}

SparsityThresholds sparsity_guarantee_thresholds(double mu) {
    if (!(mu >= 0.0) || mu > 1.0) throw SpecError("mu", "coherence must lie in [0, 1]");
    SparsityThresholds t;
    if (mu == 0.0) {
        t.unbounded = true;
        t.uniqueness = t.bp_recovery = t.stability = std::numeric_limits<double>::infinity();
        return t;
    }
    t.uniqueness = 0.5 * (1.0 + 1.0 / mu);
    t.bp_recovery = (std::sqrt(2.0) - 0.5) / mu;
    t.stability = 0.25 * (1.0 + 1.0 / mu);
    return t;
}

CoherenceReport analyze(const GlobalFrame& raw) {
    const auto& spec = raw.spec();
    CoherenceReport r;
    r.name = spec.name;
    r.rows = raw.rows();
    r.cols = raw.cols();
    r.param_count = param_count(spec);
    const auto norm = normalize(raw);
    const auto g = gram(norm.frame);
    r.frame_potential = g.frobenius_sq;
    r.trace = g.trace;
    r.offdiag_count = g.offdiag_count;
    r.averaged_bound = averaged_potential_bound(g.frobenius_sq, g.trace, g.offdiag_count);
    if (g.offdiag_count > 0)
        r.deep_frame_potential = std::max(g.frobenius_sq - g.trace, 0.0) / static_cast<double>(g.offdiag_count);
    r.mutual_coherence = r.cols >= 2 ? std::min(max_offdiag(g), 1.0) : 0.0;
    if (r.cols >= 2) r.welch_bound = welch_bound(r.rows, r.cols);
    if (spec.depth() == 1 && spec.layers.front().conv) {
        const auto& c = *spec.layers.front().conv;
        if (c.dims == 2) r.conv_welch_bound = conv_welch_bound(c.spatial, c.stride, c.filter, c.channels, spec.layers.front().width);
    }
    if (spec.depth() == 1 || spec.connectivity.pattern == Pattern::chain) r.chain_lower_bound = chain_lower_bound(raw);
    r.thresholds = sparsity_guarantee_thresholds(r.mutual_coherence);
    return r;
}

}  // namespace deepframe
