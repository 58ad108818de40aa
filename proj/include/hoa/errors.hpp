#pragma once

#include <stdexcept>
#include <string>

namespace hoa {

// Bad or malformed input (files, arguments, non-finite parameters).
// Maps to exit code / status 2.
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization could not proceed (NaN energy, diverged init).
// Maps to exit code / status 3.
class OptimFailure : public std::runtime_error {
 public:
  explicit OptimFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hoa
