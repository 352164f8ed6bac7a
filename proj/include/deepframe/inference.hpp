#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "deepframe/frame.hpp"

namespace deepframe {

enum class Method { feed_forward, layered_bp, bcd };

std::string_view to_string(Method method) noexcept;
// Accepts "feed_forward", "layered_bp", "bcd" (and '-' for '_').
std::optional<Method> parse_method(std::string_view text) noexcept;

// Nonnegative l1 penalty, one weight per layer.
struct Penalty {
    std::vector<double> lambdas;

    static Penalty uniform(Index depth, double lambda);
};

// (v - lambda)_+ elementwise.
Eigen::VectorXd prox_nonneg_soft_threshold(const Eigen::Ref<const Eigen::VectorXd>& v, double lambda);

// Largest eigenvalue of M^T M by power iteration.
double largest_squared_singular_value(const Eigen::Ref<const Eigen::MatrixXd>& m, int iterations = 30,
                                      double tolerance = 1e-8);

struct IstaResult {
    Eigen::VectorXd code;
    std::vector<double> trajectory;  // objective before the first step, then after every step
    double step = 0.0;
    bool increased = false;  // objective went up at some step (explicit steps only)
};

// 1/2 ||x - B w||^2 + lambda 1^T w over w >= 0.
double shallow_objective(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& b,
                         const Eigen::Ref<const Eigen::VectorXd>& w, double lambda);

// T proximal gradient steps from w0 (zero when empty). step <= 0 selects 1/L.
IstaResult shallow_ista(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& b,
                        double lambda, double step, int iterations, const Eigen::VectorXd& w0 = {});

using Codes = std::vector<Eigen::VectorXd>;

// Global objective: 1/2 ||x_aug - B w||^2 + sum_j lambda_j 1^T w_j with
// x_aug = [x; 0; ...]. +inf when any code has a negative entry.
double objective_value(const Codes& codes, const GlobalFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Penalty& penalty);

// w_j = phi_j(B_jj^T (x_j - sum_{k<j} B_jk w_k)), x_j = 0 beyond the first layer.
Codes feed_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame, const Penalty& penalty);

// Layer-by-layer shallow problems: w_j solves the problem for input w_{j-1}
// with dictionary B_j, by `budget` ISTA steps from zero. Chain frames only.
Codes layered_basis_pursuit(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame,
                            const Penalty& penalty, int budget);

struct BcdOptions {
    int cycles = 100;
    std::vector<double> steps;  // explicit gamma_j; empty selects 1/L_j with backtracking
    double momentum = 0.0;
    bool feed_forward_init = false;
    double tolerance = 0.0;  // stop early once the relative change per cycle drops below this
};

struct InferenceResult {
    Method method = Method::bcd;
    Codes codes;
    std::vector<double> trajectory;  // objective at start and after every cycle
    double objective = 0.0;
    std::vector<double> sparsity;     // fraction of exactly zero entries per layer
    std::vector<double> step_sizes;   // gamma_j actually used at the end
    std::vector<double> lambdas;
    int cycles = 0;
    bool flagged = false;  // objective increased with explicit steps
    std::string message;
    double seconds = 0.0;
};

InferenceResult bcd_inference(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame,
                              const Penalty& penalty, const BcdOptions& opts = {});

// Runs any method and fills the common report fields. `iterations` is the BCD
// cycle count or the layered per-layer budget; ignored by feed-forward.
InferenceResult infer(const Eigen::Ref<const Eigen::VectorXd>& x, const GlobalFrame& frame, const Penalty& penalty,
                      Method method, int iterations);

}  // namespace deepframe
