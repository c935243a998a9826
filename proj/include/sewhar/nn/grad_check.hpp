#pragma once

#include "sewhar/nn/sequential.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sewhar::nn {

// Maps a network output to (loss, dLoss/dOutput).
using Objective = std::function<std::pair<double, Tensor<double>>(const Tensor<double>& output)>;

// Mean softmax cross-entropy of [B, C] logits.
Objective cross_entropy_objective(std::vector<int> targets);

// L = sum(output * R) for a fixed random R drawn uniformly from [-1, 1];
// exercises every output element of layers whose output is not logits.
Objective projection_objective(std::uint64_t seed);

struct GradCheckOptions {
  double step = 1e-5;                 // central difference step
  std::size_t samples_per_tensor = 24;
  std::uint64_t seed = 7;
  bool check_input = true;            // also check dLoss/dInput when defined
};

struct GradCheckEntry {
  std::string name;  // "<layer index>.<kind>.<param>" or "input"
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

// |a - n| / max(|a|, |n|, 1e-6). The floor keeps entries whose true
// gradient is exactly zero (a conv bias feeding BatchNorm) from turning
// finite-difference rounding noise into a huge relative error.
double relative_error(double analytic, double numeric);

// Compares analytic gradients against central finite differences for a sample
// of entries of every parameter tensor (and of the input when the first layer
// propagates a gradient). Runs in TrainFrozen mode so BatchNorm uses batch
// statistics without touching its running averages. Throws NonFiniteValue.
GradCheckReport grad_check(Sequential<double>& net, const Tensor<double>& input, const Objective& objective,
                           const GradCheckOptions& options = {});

}  // namespace sewhar::nn
