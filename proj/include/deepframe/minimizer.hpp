#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepframe/archspec.hpp"
#include "deepframe/frame.hpp"

namespace deepframe {

struct MinimizeOptions {
    std::uint64_t seed = 0;
    int max_iters = 5000;
    double step = 1e-2;        // first step; later steps are Barzilai-Borwein, always backtracked
    double tolerance = 1e-9;   // relative objective change over `window` iterations
    int window = 50;
    int restarts = 5;
    // When > 2, a second phase minimizes sum |G_ab|^p off the diagonal from the
    // squared-potential minimizer. Pushes tight frames towards equiangular ones.
    double refine_exponent = 0.0;
    int threads = 1;
};

// Throws SpecError unless every field is usable.
void check_options(const MinimizeOptions& opts);

struct TracePoint {
    int iteration = 0;
    double objective = 0.0;
    double coherence = 0.0;
};

struct RestartResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string message;  // why a failed restart was aborted
    double objective = 0.0;
    double coherence = 0.0;
    int iterations = 0;
    std::vector<TracePoint> trajectory;
    FrameParams params;
};

struct MinResult {
    double objective = 0.0;       // minimized normalized deep frame potential
    double frame_potential = 0.0; // ||G||_F^2 at the minimizer
    double coherence = 0.0;
    std::int64_t offdiag_count = 0;
    int iterations = 0;
    int best_restart = 0;
    FrameParams params;
    std::vector<RestartResult> restarts;
};

struct PotentialValue {
    double objective = 0.0;  // sum_{a != b} |G_ab|^p / N(G)
    double coherence = 0.0;
    Eigen::VectorXd gradient;  // empty unless requested
};

// Normalized deep frame potential of the frame built from `params`, with the
// gradient taken through the column normalization with respect to the raw
// parameters. Throws NumericalError on a zero-norm column.
PotentialValue evaluate_potential(const FrameLayout& layout, const FrameParams& params, double exponent = 2.0,
                                  bool with_gradient = true);
Eigen::VectorXd potential_gradient(const FrameLayout& layout, const FrameParams& params, double exponent = 2.0);

MinResult minimize_deep_frame_potential(const ArchitectureSpec& spec, const MinimizeOptions& opts);

}  // namespace deepframe
