#include "sewhar/nn/loss.hpp"

#include <cmath>

namespace sewhar::nn {

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeMismatch("softmax: expected [B, C] logits, got " + to_string(logits.shape()));
  Tensor<T> probs = logits;
  auto p = probs.matrix(logits.dim(0));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    auto row = p.row(r).array();
    row = (row - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return probs;
}

template <typename T>
CrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  CrossEntropy<T> out;
  out.probs = softmax(logits);
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch) {
    throw ShapeMismatch("cross entropy: " + std::to_string(targets.size()) + " targets for batch of " +
                        std::to_string(batch));
  }
  out.grad_logits = out.probs;
  double total = 0.0;
  const T inv_batch = T(1) / static_cast<T>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = targets[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw TargetOutOfRange("target " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
    // log p computed from the logits directly so it stays finite when p underflows.
    const T* row = logits.data() + i * classes;
    T max = row[0];
    for (std::size_t c = 1; c < classes; ++c) max = std::max(max, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c] - max));
    total += std::log(sum) - static_cast<double>(row[y] - max);

    out.grad_logits[i * classes + static_cast<std::size_t>(y)] -= T(1);
  }
  for (auto& g : out.grad_logits.values()) g *= inv_batch;
  out.loss = total / static_cast<double>(batch);
  return out;
}

template <typename T>
DenseSoftmaxResult<T> dense_softmax_ce(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                                       std::span<const int> targets) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0) || bias.size() != weight.dim(1)) {
    throw ShapeMismatch("dense_softmax_ce: incompatible shapes " + to_string(x.shape()) + " " +
                        to_string(weight.shape()) + " " + to_string(bias.shape()));
  }
  Tensor<T> logits({x.dim(0), weight.dim(1)});
  auto l = logits.matrix(x.dim(0));
  l.noalias() = x.matrix(x.dim(0)) * weight.matrix(weight.dim(0));
  l.rowwise() += ConstRowVectorMap<T>(bias.data(), static_cast<Eigen::Index>(bias.size()));
  auto ce = softmax_cross_entropy(logits, targets);
  return {std::move(ce.probs), ce.loss};
}

template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template CrossEntropy<float> softmax_cross_entropy(const Tensor<float>&, std::span<const int>);
template CrossEntropy<double> softmax_cross_entropy(const Tensor<double>&, std::span<const int>);
template DenseSoftmaxResult<float> dense_softmax_ce(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                                    std::span<const int>);
template DenseSoftmaxResult<double> dense_softmax_ce(const Tensor<double>&, const Tensor<double>&,
                                                     const Tensor<double>&, std::span<const int>);

}  // namespace sewhar::nn
