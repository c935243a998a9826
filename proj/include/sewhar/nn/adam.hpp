#pragma once

#include "sewhar/nn/layers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sewhar::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

// Bias-corrected adaptive moment estimation:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Moment buffers are created on the first step and must keep their shapes.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Param<T>* const> params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

  // Restores a saved state; throws ShapeMismatch if m and v disagree.
  void restore(std::uint64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v);

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace sewhar::nn
