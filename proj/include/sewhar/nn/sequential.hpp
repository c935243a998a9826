#pragma once

#include "sewhar/nn/layers.hpp"

#include <memory>
#include <vector>

namespace sewhar::nn {

// Owning chain of layers. Copies are deep.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<T> forward(const Tensor<T>& input, Mode mode);
  // Returns dLoss/dInput, empty when the first layer consumes tokens.
  Tensor<T> backward(const Tensor<T>& grad_output);

  std::vector<Param<T>*> params();
  std::vector<std::pair<std::string, Tensor<T>*>> buffers();
  void zero_grad();
  void initialize(Rng& rng);
  std::size_t parameter_count();

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
  // Swaps a layer in place (used to inject faults in tests).
  void replace(std::size_t i, std::unique_ptr<Layer<T>> layer) { layers_.at(i) = std::move(layer); }

  // Output shape of every layer during the last forward pass.
  const std::vector<Shape>& last_shapes() const { return shapes_; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Shape> shapes_;
};

}  // namespace sewhar::nn
