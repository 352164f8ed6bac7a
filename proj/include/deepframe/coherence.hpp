#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepframe/frame.hpp"
#include "deepframe/gram.hpp"

namespace deepframe {

// ||G||_F^2 = sum of squared inner products of all column pairs (diagonal included).
double frame_potential(const Eigen::Ref<const Eigen::MatrixXd>& frame);
double frame_potential(const GlobalFrame& frame);

// Largest |<b_a, b_b>| / (||b_a|| ||b_b||) over distinct columns. Throws on a
// zero column or fewer than two columns.
double mutual_coherence(const Eigen::Ref<const Eigen::MatrixXd>& frame);
double mutual_coherence(const GlobalFrame& frame);

// sqrt((FP - Tr(G)) / N(G)); empty when N(G) == 0.
std::optional<double> averaged_potential_bound(double frame_potential, double trace, std::int64_t offdiag_count);

// sqrt((k/d - 1) / (k - 1)); 0 when k <= d. Throws for k < 2.
double welch_bound(Index d, Index k);

// Multichannel convolutional bound for d channels, k filters:
//   sqrt((k/(d s^2) - 1) / (k ((2 - (o-1) s / p) o - 1)^2 - 1)),  o = ceil(f/s)
// clamped at 0.
double conv_welch_bound(Index p, Index s, Index f, Index d, Index k);
// Large-p limit at s = 1: sqrt((k/d - 1) / (k (2f - 1)^2 - 1)), clamped at 0.
double conv_welch_limit(Index f, Index d, Index k);

// Lower bound on ||G||_F^2 of a normalized chain frame given the raw column
// magnitudes c_j of every diagonal block. dims = [k_0 .. k_l].
double chain_lower_bound(const std::vector<Index>& dims, const std::vector<Eigen::VectorXd>& magnitudes);
// Same, with magnitudes read off the raw frame. Throws for non-chain frames.
double chain_lower_bound(const GlobalFrame& raw);

struct SparsityThresholds {
    double uniqueness = 0.0;   // 1/2 (1 + 1/mu)
    double bp_recovery = 0.0;  // (sqrt(2) - 1/2) / mu
    double stability = 0.0;    // 1/4 (1 + 1/mu)
    bool unbounded = false;    // mu == 0
};

SparsityThresholds sparsity_guarantee_thresholds(double mu);

struct CoherenceReport {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    bool normalized = true;
    double frame_potential = 0.0;
    double trace = 0.0;
    std::int64_t offdiag_count = 0;
    std::optional<double> averaged_bound;
    // (FP - Tr(G)) / N(G): the normalized deep frame potential.
    std::optional<double> deep_frame_potential;
    double mutual_coherence = 0.0;
    std::optional<double> welch_bound;
    std::optional<double> conv_welch_bound;
    std::optional<double> chain_lower_bound;
    SparsityThresholds thresholds;
    std::int64_t param_count = 0;
};

// Full report for a raw (unnormalized) frame; potentials and coherence refer
// to its normalized version.
CoherenceReport analyze(const GlobalFrame& raw);

}  // namespace deepframe
