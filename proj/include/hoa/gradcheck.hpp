#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hoa {

// Finite-difference verification of every energy-term gradient and the FK
// Jacobian on small synthetic scenes. Render-backed terms are checked at
// 1e-2 relative error, analytic terms at 1e-4.
struct GradCheckReport {
  struct Entry {
    std::string name;
    int trial = 0;
    double rel_err = 0;
    double tolerance = 0;
    bool pass = false;
  };
  std::vector<Entry> entries;
  double seconds = 0;

  bool allPass() const {
    for (const auto& e : entries) {
      if (!e.pass) return false;
    }
    return !entries.empty();
  }
};

GradCheckReport runGradientChecks(uint64_t seed, int trials = 5);

}  // namespace hoa
