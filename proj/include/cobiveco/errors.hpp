#pragma once

#include <stdexcept>

namespace cobiveco {

/// Malformed or inconsistent input data (files, meshes, configurations).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (singular system, degenerate geometry, non-convergence).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cobiveco
