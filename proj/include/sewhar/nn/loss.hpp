#pragma once

#include "sewhar/nn/tensor.hpp"

#include <span>

namespace sewhar::nn {

// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

template <typename T>
struct CrossEntropy {
  Tensor<T> probs;        // [B, C]
  double loss = 0.0;      // mean over the batch of -log p[target]
  Tensor<T> grad_logits;  // dLoss/dLogits = (probs - onehot) / B
};

// Throws TargetOutOfRange.
template <typename T>
CrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

template <typename T>
struct DenseSoftmaxResult {
  Tensor<T> probs;
  double loss = 0.0;
};

// logits = x W + b, then softmax_cross_entropy.
template <typename T>
DenseSoftmaxResult<T> dense_softmax_ce(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                                       std::span<const int> targets);

}  // namespace sewhar::nn
