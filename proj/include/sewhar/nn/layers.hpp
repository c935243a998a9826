#pragma once

#include "sewhar/nn/tensor.hpp"
#include "sewhar/rng.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sewhar::nn {

enum class Mode {
  Train,        // batch statistics, running statistics updated
  Infer,        // running statistics
  TrainFrozen,  // batch statistics, running statistics left untouched (gradient checks)
};

enum class LayerKind { Embedding, OneHot, IndexInput, Conv1D, TokenConv1D, BatchNorm, ReLU, GAP, Dense, LSTM };

std::string_view to_string(LayerKind kind);

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
};

// A differentiable stage. forward() caches whatever backward() needs;
// backward() takes dLoss/dOutput, accumulates dLoss/dParams into each
// Param::grad and returns dLoss/dInput (empty when input gradients are
// disabled or undefined, as for token inputs).
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::vector<Param<T>*> params() { return {}; }
  // Non-trainable state saved with the model (BatchNorm running statistics).
  virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }
  virtual void initialize(Rng& /*rng*/) {}

  virtual void set_input_grad(bool enabled) { input_grad_ = enabled; }
  bool input_grad() const { return input_grad_; }

 protected:
  bool input_grad_ = true;
};

// Token lookup into a trainable [vocab+1, dim] table; row 0 is the padding
// row and is trained like every other row. Input holds token ids as values.
template <typename T>
class Embedding final : public Layer<T> {
 public:
  Embedding(std::size_t vocab_size, std::size_t dim);

  LayerKind kind() const override { return LayerKind::Embedding; }
  Tensor<T> forward(const Tensor<T>& tokens, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Embedding>(*this); }
  std::vector<Param<T>*> params() override { return {&table_}; }
  void initialize(Rng& rng) override;

  Param<T>& table() { return table_; }

 private:
  Param<T> table_;
  std::vector<std::size_t> cached_rows_;
  Shape cached_shape_;
};

// [B, T] token ids -> [B, T, vocab+1] indicator vectors.
template <typename T>
class OneHot final : public Layer<T> {
 public:
  explicit OneHot(std::size_t vocab_size) : width_(vocab_size + 1) {}

  LayerKind kind() const override { return LayerKind::OneHot; }
  Tensor<T> forward(const Tensor<T>& tokens, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<OneHot>(*this); }

 private:
  std::size_t width_;
};

// [B, T] token ids -> [B, T, 1]: the frequency index itself as a scalar feature.
template <typename T>
class IndexInput final : public Layer<T> {
 public:
  explicit IndexInput(std::size_t vocab_size) : vocab_size_(vocab_size) {}

  LayerKind kind() const override { return LayerKind::IndexInput; }
  Tensor<T> forward(const Tensor<T>& tokens, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<IndexInput>(*this); }

 private:
  std::size_t vocab_size_;
};

// Stride-1, length-preserving 1D convolution over [B, T, Cin].
// Zero padding: ceil((K-1)/2) on the left, floor((K-1)/2) on the right.
template <typename T>
class Conv1D final : public Layer<T> {
 public:
  Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size);

  LayerKind kind() const override { return LayerKind::Conv1D; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv1D>(*this); }
  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }
  void initialize(Rng& rng) override;

  Param<T>& kernel() { return kernel_; }  // [K, Cin, Cout]
  Param<T>& bias() { return bias_; }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t kernel_size() const { return k_; }

 private:
  std::size_t in_, out_, k_;
  Param<T> kernel_;
  Param<T> bias_;
  Matrix<T> cols_;  // im2col of the last input, [B*T, K*Cin]
  std::size_t batch_ = 0, steps_ = 0;
};

// Embedding (or one-hot) followed by Conv1D, computed on token ids.
// Since conv(embed(x)) = sum_k (table * kernel_k)[x[t+k-K/2]], the layer
// builds the K lookup tables table * kernel_k once per pass and gathers
// rows; for one-hot input the lookup tables are the kernel slices
// themselves. Parameters, their initialization order and the padding rule
// match the two separate layers exactly.
template <typename T>
class TokenConv1D final : public Layer<T> {
 public:
  // embedding_dim == 0 means one-hot input of width vocab_size + 1.
  TokenConv1D(std::size_t vocab_size, std::size_t embedding_dim, std::size_t out_channels, std::size_t kernel_size);

  LayerKind kind() const override { return LayerKind::TokenConv1D; }
  Tensor<T> forward(const Tensor<T>& tokens, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<TokenConv1D>(*this); }
  std::vector<Param<T>*> params() override;
  void initialize(Rng& rng) override;

  bool embedded() const { return dim_ > 0; }
  Param<T>& table() { return table_; }  // [V+1, D]; empty for one-hot input
  Param<T>& kernel() { return kernel_; }  // [K, D or V+1, Cout]
  Param<T>& bias() { return bias_; }

 private:
  std::size_t rows_, dim_, out_, k_;
  Param<T> table_;
  Param<T> kernel_;
  Param<T> bias_;
  Matrix<T> lookup_;                // [K*rows, Cout]
  std::vector<std::uint32_t> ids_;  // tokens of the last forward
  std::size_t batch_ = 0, steps_ = 0;
};

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kDefaultEpsilon = 1e-3;
  static constexpr double kDefaultMomentum = 0.99;

  explicit BatchNorm(std::size_t channels, double epsilon = kDefaultEpsilon, double momentum = kDefaultMomentum);

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}, {"updates", &updates_}};
  }
  void initialize(Rng& rng) override;

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }
  // Train-mode updates so far. The first one copies the batch statistics
  // into the running ones; later ones use the exponential moving average.
  std::size_t updates() const { return static_cast<std::size_t>(updates_[0]); }

 private:
  std::size_t channels_;
  double epsilon_, momentum_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> updates_;  // [1], a count kept as a tensor so checkpoints carry it
  Matrix<T> normalized_;                          // x_hat of the last forward
  Eigen::Matrix<T, 1, Eigen::Dynamic> inv_std_;   // per channel
  bool batch_stats_ = true;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  std::vector<std::uint8_t> active_;  // x > 0 in the last forward
};

// [B, T, C] -> [B, C], mean over time.
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::GAP; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  Shape input_shape_;
};

// [B, F] -> [B, C] affine map.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  LayerKind kind() const override { return LayerKind::Dense; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }
  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;

  Param<T>& weight() { return weight_; }  // [F, C]
  Param<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Param<T> weight_, bias_;
  Tensor<T> input_;
};

// Many-to-one LSTM: [B, T, D] -> h_T of shape [B, H]. Zero initial state.
// Gate blocks in every weight are ordered input, forget, candidate, output.
template <typename T>
class LSTM final : public Layer<T> {
 public:
  LSTM(std::size_t input_dim, std::size_t units);

  LayerKind kind() const override { return LayerKind::LSTM; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LSTM>(*this); }
  std::vector<Param<T>*> params() override { return {&input_weight_, &recurrent_weight_, &bias_}; }
  void initialize(Rng& rng) override;

  Param<T>& input_weight() { return input_weight_; }          // [D, 4H]
  Param<T>& recurrent_weight() { return recurrent_weight_; }  // [H, 4H]
  Param<T>& bias() { return bias_; }                          // [4H]
  std::size_t units() const { return units_; }

 private:
  std::size_t input_dim_, units_;
  Param<T> input_weight_, recurrent_weight_, bias_;
  // Caches of the last forward pass.
  Tensor<T> input_;
  std::vector<Matrix<T>> gates_;   // per step [B, 4H], activated
  std::vector<Matrix<T>> cells_;   // per step c_t, [B, H]; index 0 is c_0
  std::vector<Matrix<T>> hidden_;  // per step h_t; index 0 is h_0
  std::vector<Matrix<T>> cell_tanh_;
};

// Wraps a layer and scales the input gradient it returns; used to prove the
// gradient checker catches a broken backward pass.
template <typename T>
class CorruptedBackward final : public Layer<T> {
 public:
  CorruptedBackward(std::unique_ptr<Layer<T>> inner, T factor) : inner_(std::move(inner)), factor_(factor) {}
  CorruptedBackward(const CorruptedBackward& other) : Layer<T>(other), inner_(other.inner_->clone()), factor_(other.factor_) {}

  LayerKind kind() const override { return inner_->kind(); }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override { return inner_->forward(x, mode); }
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<CorruptedBackward>(*this); }
  std::vector<Param<T>*> params() override { return inner_->params(); }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override { return inner_->buffers(); }
  void initialize(Rng& rng) override { inner_->initialize(rng); }
  void set_input_grad(bool enabled) override {
    Layer<T>::set_input_grad(enabled);
    inner_->set_input_grad(enabled);
  }

 private:
  std::unique_ptr<Layer<T>> inner_;
  T factor_;
};

// Uniform in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace sewhar::nn
