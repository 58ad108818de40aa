#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hoa/errors.hpp"
#include "hoa/optim.hpp"

#include <cmath>

using namespace hoa;

TEST_CASE("adam: convex quadratic converges") {
  VecX target(4);
  target << 1.0, -2.0, 0.5, 3.0;
  const Objective f = [&](const VecX& x, VecX* g) {
    if (g) *g = 2.0 * (x - target);
    return (x - target).squaredNorm();
  };
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.iterations = 500;
  const AdamResult res = adamMinimize(f, VecX::Zero(4), cfg);
  CHECK((res.params - target).norm() < 1e-3);
  CHECK(res.best_value <= res.initial_value);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  const Objective f = [](const VecX& x, VecX* g) {
    if (g) g->setZero(x.size());
    return 7.0;
  };
  VecX init(3);
  init << 1, 2, 3;
  const AdamResult res = adamMinimize(f, init, {});
  CHECK((res.params - init).norm() == 0.0);
}

TEST_CASE("adam: Rosenbrock reaches the valley floor") {
  const Objective f = [](const VecX& x, VecX* g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    if (g) {
      g->resize(2);
      (*g)[0] = -2 * a - 400 * x[0] * b;
      (*g)[1] = 200 * b;
    }
    return a * a + 100 * b * b;
  };
  VecX init(2);
  init << -1.2, 1.0;
  AdamConfig cfg;
  cfg.iterations = 5000;
  cfg.learning_rate = 0.01;
  const AdamResult res = adamMinimize(f, init, cfg);
  CHECK(res.best_value < 1e-2);
}

TEST_CASE("adam: NaN objective aborts with a diagnostic") {
  const Objective f = [](const VecX& x, VecX* g) {
    if (g) g->setConstant(x.size(), 1.0);
    return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : x[0];
  };
  VecX init(1);
  init << 10.0;
  CHECK_THROWS_AS(adamMinimize(f, init, {}), OptimFailure);
}

TEST_CASE("adam: best-seen contract on a noisy landscape") {
  // Oscillating objective: the returned value must still be <= initial.
  const Objective f = [](const VecX& x, VecX* g) {
    const double v = std::sin(10 * x[0]) + 0.1 * x[0] * x[0];
    if (g) {
      g->resize(1);
      (*g)[0] = 10 * std::cos(10 * x[0]) + 0.2 * x[0];
    }
    return v;
  };
  VecX init(1);
  init << 2.0;
  const AdamResult res = adamMinimize(f, init, {});
  CHECK(res.best_value <= res.initial_value);
}

TEST_CASE("dogleg: well-conditioned linear residual solves in <= 2 iterations") {
  MatX a(5, 3);
  a << 2, 0, 1, 0, 3, -1, 1, 1, 4, 0, 0, 2, 1, -2, 0;
  VecX b(5);
  b << 1, 2, 3, 4, 5;
  const ResidualFn fn = [&](const VecX& x, VecX* r, MatX* jac) {
    *r = a * x - b;
    if (jac) *jac = a;
  };
  const TrustRegionResult res = trustRegionMinimize(fn, VecX::Zero(3), {});
  CHECK(res.iterations_run <= 2);
  const VecX expect = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  CHECK((res.params - expect).norm() < 1e-8);
}

TEST_CASE("dogleg: zero residual at init returns init") {
  const ResidualFn fn = [](const VecX& x, VecX* r, MatX* jac) {
    *r = x;  // zero at origin
    if (jac) *jac = MatX::Identity(x.size(), x.size());
  };
  const TrustRegionResult res = trustRegionMinimize(fn, VecX::Zero(4), {});
  CHECK(res.params.norm() == 0.0);
  CHECK(res.final_cost == 0.0);
}

TEST_CASE("dogleg: 3-joint planar chain recovers angles from exact targets") {
  // Chain of unit links in 2D; residuals are the joint positions minus the
  // targets computed from ground-truth angles.
  const VecX truth = (VecX(3) << 0.4, -0.3, 0.7).finished();
  auto positions = [](const VecX& q) {
    MatX p(3, 2);
    double ang = 0, x = 0, y = 0;
    for (int i = 0; i < 3; ++i) {
      ang += q[i];
      x += std::cos(ang);
      y += std::sin(ang);
      p.row(i) << x, y;
    }
    return p;
  };
  const MatX target = positions(truth);
  const ResidualFn fn = [&](const VecX& q, VecX* r, MatX* jac) {
    const MatX p = positions(q);
    r->resize(6);
    for (int i = 0; i < 3; ++i) {
      (*r)[2 * i] = p(i, 0) - target(i, 0);
      (*r)[2 * i + 1] = p(i, 1) - target(i, 1);
    }
    if (jac) {
      // dp_i/dq_j = sum_{k=j..i} (-sin A_k, cos A_k), A_k = q_0 + ... + q_k.
      jac->setZero(6, 3);
      for (int j = 0; j < 3; ++j) {
        double sx = 0, sy = 0;
        for (int i = j; i < 3; ++i) {
          double abs_ang = 0;
          for (int k = 0; k <= i; ++k) abs_ang += q[k];
          sx += -std::sin(abs_ang);
          sy += std::cos(abs_ang);
          (*jac)(2 * i, j) = sx;
          (*jac)(2 * i + 1, j) = sy;
        }
      }
    }
  };
  TrustRegionConfig cfg;
  cfg.max_iterations = 200;
  const TrustRegionResult res = trustRegionMinimize(fn, VecX::Zero(3), cfg);
  CHECK((res.params - truth).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("dogleg: rank-deficient Jacobian falls back to damping") {
  // Second column duplicates the first: singular normal equations.
  MatX a(4, 3);
  a << 1, 1, 0, 2, 2, 1, 3, 3, -1, 0, 0, 2;
  VecX b(4);
  b << 1, 1, 1, 1;
  const ResidualFn fn = [&](const VecX& x, VecX* r, MatX* jac) {
    *r = a * x - b;
    if (jac) *jac = a;
  };
  const TrustRegionResult res = trustRegionMinimize(fn, VecX::Zero(3), {});
  // Still reaches a least-squares optimum.
  const VecX grad = a.transpose() * (a * res.params - b);
  CHECK(grad.norm() < 1e-6);
}
