#pragma once

#include "hoa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hoa {

// Deterministic random source. Distributions are implemented here rather
// than with std:: distribution objects so that streams are bit-identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniformInt(int n) {  // [0, n)
    return std::min(n - 1, static_cast<int>(uniform() * n));
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  Vec3 normalVec3() {
    Vec3 v;
    v << normal(), normal(), normal();
    return v;
  }

  Vec3 unitVec3() {
    Vec3 v = normalVec3();
    const double n = v.norm();
    return n > 1e-12 ? Vec3(v / n) : Vec3(1, 0, 0);
  }

  // k distinct indices from [0, n), ascending.
  std::vector<int> sampleWithoutReplacement(int n, int k) {
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    k = std::min(k, n);
    for (int i = 0; i < k; ++i) {
      const int j = i + uniformInt(n - i);
      std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace hoa
