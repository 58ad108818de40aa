#include "hoa/optim.hpp"

#include "hoa/errors.hpp"

#include <cmath>

namespace hoa {

AdamResult adamMinimize(const Objective& objective, const VecX& init,
                        const AdamConfig& config) {
  const int n = static_cast<int>(init.size());
  VecX x = init;
  VecX m = VecX::Zero(n), v = VecX::Zero(n), grad(n);

  AdamResult result;
  result.params = init;
  result.initial_value = objective(init, nullptr);
  if (!std::isfinite(result.initial_value))
    throw OptimFailure("adam: objective non-finite at the initial point");
  result.best_value = result.initial_value;

  for (int it = 0; it < config.iterations; ++it) {
    const double value = objective(x, &grad);
    if (!std::isfinite(value)) throw OptimFailure("adam: objective became non-finite");
    if (!grad.allFinite()) throw OptimFailure("adam: gradient became non-finite");
    result.value_log.push_back(value);
    if (value < result.best_value) {
      result.best_value = value;
      result.params = x;
    }
    result.iterations_run = it + 1;
    if (grad.lpNorm<Eigen::Infinity>() < config.grad_tol) break;

    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v.array().matrix() +
        (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(config.beta1, it + 1);
    const double bc2 = 1.0 - std::pow(config.beta2, it + 1);
    const double lr = config.learning_rate * std::pow(config.lr_decay, it);
    for (int i = 0; i < n; ++i) {
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
  // The last update is only kept if it improves.
  const double final_value = objective(x, nullptr);
  if (std::isfinite(final_value) && final_value < result.best_value) {
    result.best_value = final_value;
    result.params = x;
  }
  return result;
}

TrustRegionResult trustRegionMinimize(const ResidualFn& residuals,
                                      const VecX& init,
                                      const TrustRegionConfig& config) {
  VecX x = init;
  VecX r;
  MatX jac;
  residuals(x, &r, &jac);
  if (!r.allFinite() || !jac.allFinite())
    throw OptimFailure("dogleg: residuals non-finite at the initial point");

  TrustRegionResult result;
  double cost = 0.5 * r.squaredNorm();
  result.initial_cost = cost;
  result.params = x;
  result.final_cost = cost;

  double radius = config.initial_radius;  // 0 = auto-scale from first step

  for (int it = 0; it < config.max_iterations; ++it) {
    result.iterations_run = it + 1;
    const VecX grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < config.grad_tol) break;

    // Gauss-Newton step from the normal equations, with a damped retry
    // when the factorization is unusable.
    const MatX jtj = jac.transpose() * jac;
    VecX gn_step;
    {
      Eigen::LDLT<MatX> ldlt(jtj);
      gn_step = ldlt.solve(-grad);
      const double rel_err = (jtj * gn_step + grad).norm() /
                             std::max(grad.norm(), 1e-300);
      if (ldlt.info() != Eigen::Success || !gn_step.allFinite() ||
          rel_err > 1e-6) {
        result.used_damped_fallback = true;
        MatX damped = jtj;
        const double mu = 1e-8 * std::max(1.0, jtj.diagonal().maxCoeff());
        damped.diagonal().array() += mu;
        gn_step = Eigen::LDLT<MatX>(damped).solve(-grad);
      }
    }

    if (radius <= 0) radius = std::min(2.0 * gn_step.norm() + 1e-12, config.max_radius);

    // Cauchy (steepest descent) step.
    const double g2 = grad.squaredNorm();
    const double jg2 = (jac * grad).squaredNorm();
    const VecX sd_step = (jg2 > 0) ? VecX(-(g2 / jg2) * grad) : VecX(-grad);

    // Dogleg path.
    VecX step;
    if (gn_step.norm() <= radius) {
      step = gn_step;
    } else if (sd_step.norm() >= radius) {
      step = sd_step * (radius / sd_step.norm());
    } else {
      // Interpolate: ||sd + s (gn - sd)|| = radius, s in [0, 1].
      const VecX d = gn_step - sd_step;
      const double a = d.squaredNorm();
      const double b = 2.0 * sd_step.dot(d);
      const double c = sd_step.squaredNorm() - radius * radius;
      const double disc = std::max(b * b - 4 * a * c, 0.0);
      const double s = (-b + std::sqrt(disc)) / (2 * a);
      step = sd_step + s * d;
    }

    VecX r_new;
    residuals(x + step, &r_new, nullptr);
    const double new_cost =
        r_new.allFinite() ? 0.5 * r_new.squaredNorm()
                          : std::numeric_limits<double>::infinity();
    const double predicted =
        -(grad.dot(step) + 0.5 * step.dot(jtj * step));
    const double rho = predicted > 0 ? (cost - new_cost) / predicted : -1.0;

    if (rho > 1e-4 && new_cost < cost) {
      x += step;
      cost = new_cost;
      residuals(x, &r, &jac);
      if (!jac.allFinite()) throw OptimFailure("dogleg: Jacobian became non-finite");
      if (cost < result.final_cost) {
        result.final_cost = cost;
        result.params = x;
      }
      if (rho > 0.75 && step.norm() > 0.9 * radius) {
        radius = std::min(2.0 * radius, config.max_radius);
      }
    } else {
      radius *= 0.5;
      if (radius < config.min_radius) break;
    }
    if (cost < 1e-300) break;
  }
  return result;
}

}  // namespace hoa
