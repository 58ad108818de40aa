#pragma once

#include "hoa/geometry.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hoa {

// Scalar objective returning the value and, when grad != nullptr, the
// gradient at x (grad is resized by the callee).
using Objective = std::function<double(const VecX& x, VecX* grad)>;

struct AdamConfig {
  int iterations = 100;
  double learning_rate = 0.01;
  double lr_decay = 1.0;  // geometric per-iteration decay (1 = constant)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_tol = 1e-8;  // early exit on gradient infinity-norm
};

struct AdamResult {
  VecX params;        // best-seen parameters
  double best_value = 0;
  double initial_value = 0;
  std::vector<double> value_log;  // one entry per iteration
  int iterations_run = 0;
};

// Adaptive-moment gradient descent. Returns the best parameters seen,
// which never evaluate worse than the initial point. Throws OptimFailure
// when the objective goes non-finite.
AdamResult adamMinimize(const Objective& objective, const VecX& init,
                        const AdamConfig& config);

// Residual function for least-squares problems: fills r (resized by the
// callee) and, when jac != nullptr, the dense Jacobian dr/dx.
using ResidualFn = std::function<void(const VecX& x, VecX* r, MatX* jac)>;

struct TrustRegionConfig {
  int max_iterations = 100;
  double grad_tol = 1e-8;
  double initial_radius = 0;  // 0: scale from the first Gauss-Newton step
  double max_radius = 1e3;
  double min_radius = 1e-14;
};

struct TrustRegionResult {
  VecX params;
  double final_cost = 0;    // 0.5 * |r|^2
  double initial_cost = 0;
  int iterations_run = 0;
  bool used_damped_fallback = false;
};

// Powell dogleg: blends the Gauss-Newton and steepest-descent steps inside
// an adaptive trust radius. Singular normal equations fall back to a
// Levenberg-damped solve.
TrustRegionResult trustRegionMinimize(const ResidualFn& residuals,
                                      const VecX& init,
                                      const TrustRegionConfig& config);

}  // namespace hoa
