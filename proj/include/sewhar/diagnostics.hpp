#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sewhar {

struct GradientSuiteOptions {
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  std::size_t samples_per_tensor = 24;
  double step = 1e-5;  // central difference step
  // Negative control: wrap the first layer of this kind ("conv1d", "lstm", ...)
  // in every case so its backward pass is scaled by fault_factor.
  std::optional<std::string> fault;
  double fault_factor = 1.5;
};

struct GradientCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  std::string worst;  // entry with the largest error
};

// Finite-difference check of every layer alone and of the composed FCN and
// LSTM models (B=2, W=25, V=20, C=4), in double precision.
std::vector<GradientCase> run_gradient_suite(const GradientSuiteOptions& options = {});

}  // namespace sewhar
