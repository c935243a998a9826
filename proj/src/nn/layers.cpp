#include "sewhar/nn/layers.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace sewhar::nn {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Embedding: return "embedding";
    case LayerKind::OneHot: return "onehot";
    case LayerKind::IndexInput: return "index";
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::TokenConv1D: return "token_conv1d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::GAP: return "gap";
    case LayerKind::Dense: return "dense";
    case LayerKind::LSTM: return "lstm";
  }
  return "?";
}

namespace {

void expect_rank(const Shape& shape, std::size_t rank, const char* who) {
  if (shape.size() != rank) {
    throw ShapeMismatch(std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " +
                        to_string(shape));
  }
}

// Token ids travel as tensor values; they must be integers in [0, max_token].
template <typename T>
std::size_t token_at(const Tensor<T>& tokens, std::size_t i, std::size_t max_token) {
  const T v = tokens[i];
  if (!(v >= T(0) && v <= static_cast<T>(max_token)) || v != std::floor(v)) {
    std::ostringstream os;
    os << "token " << v << " outside [0, " << max_token << "]";
    throw TokenOutOfRange(os.str());
  }
  return static_cast<std::size_t>(v);
}

template <typename T>
void uniform_fill(Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace

template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  uniform_fill(t, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

// ---------------------------------------------------------------- Embedding

template <typename T>
Embedding<T>::Embedding(std::size_t vocab_size, std::size_t dim) : table_("table", {vocab_size + 1, dim}) {}

template <typename T>
void Embedding<T>::initialize(Rng& rng) {
  uniform_fill(table_.value, 0.05, rng);
}

template <typename T>
Tensor<T> Embedding<T>::forward(const Tensor<T>& tokens, Mode) {
  expect_rank(tokens.shape(), 2, "embedding");
  const std::size_t rows = table_.value.dim(0);
  const std::size_t dim = table_.value.dim(1);
  cached_shape_ = tokens.shape();
  cached_rows_.resize(tokens.size());
  Tensor<T> out({tokens.dim(0), tokens.dim(1), dim});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::size_t row = token_at(tokens, i, rows - 1);
    cached_rows_[i] = row;
    std::memcpy(out.data() + i * dim, table_.value.data() + row * dim, dim * sizeof(T));
  }
  return out;
}

template <typename T>
Tensor<T> Embedding<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t dim = table_.value.dim(1);
  if (grad_out.size() != cached_rows_.size() * dim) throw ShapeMismatch("embedding: gradient shape mismatch");
  for (std::size_t i = 0; i < cached_rows_.size(); ++i) {
    T* dst = table_.grad.data() + cached_rows_[i] * dim;
    const T* src = grad_out.data() + i * dim;
    for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
  }
  return {};
}

// ---------------------------------------------------------------- OneHot

template <typename T>
Tensor<T> OneHot<T>::forward(const Tensor<T>& tokens, Mode) {
  expect_rank(tokens.shape(), 2, "onehot");
  Tensor<T> out({tokens.dim(0), tokens.dim(1), width_});
  for (std::size_t i = 0; i < tokens.size(); ++i) out[i * width_ + token_at(tokens, i, width_ - 1)] = T(1);
  return out;
}

template <typename T>
Tensor<T> OneHot<T>::backward(const Tensor<T>&) {
  return {};
}

// ---------------------------------------------------------------- IndexInput

template <typename T>
Tensor<T> IndexInput<T>::forward(const Tensor<T>& tokens, Mode) {
  expect_rank(tokens.shape(), 2, "index");
  Tensor<T> out({tokens.dim(0), tokens.dim(1), 1});
  for (std::size_t i = 0; i < tokens.size(); ++i) out[i] = static_cast<T>(token_at(tokens, i, vocab_size_));
  return out;
}

template <typename T>
Tensor<T> IndexInput<T>::backward(const Tensor<T>&) {
  return {};
}

// ---------------------------------------------------------------- Conv1D

template <typename T>
Conv1D<T>::Conv1D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size)
    : in_(in_channels),
      out_(out_channels),
      k_(kernel_size),
      kernel_("kernel", {kernel_size, in_channels, out_channels}),
      bias_("bias", {out_channels}) {}

template <typename T>
void Conv1D<T>::initialize(Rng& rng) {
  glorot_uniform(kernel_.value, k_ * in_, k_ * out_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor<T> Conv1D<T>::forward(const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 3, "conv1d");
  if (x.dim(2) != in_) {
    throw ShapeMismatch("conv1d: expected " + std::to_string(in_) + " input channels, got " + to_string(x.shape()));
  }
  batch_ = x.dim(0);
  steps_ = x.dim(1);
  const std::size_t pad_left = k_ / 2;  // ceil((K-1)/2)
  const std::size_t width = k_ * in_;
  cols_.resize(static_cast<Eigen::Index>(batch_ * steps_), static_cast<Eigen::Index>(width));
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t t = 0; t < steps_; ++t) {
      T* row = cols_.data() + (b * steps_ + t) * width;
      for (std::size_t k = 0; k < k_; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad_left);
        T* dst = row + k * in_;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps_)) {
          std::memset(dst, 0, in_ * sizeof(T));
        } else {
          std::memcpy(dst, x.data() + (b * steps_ + static_cast<std::size_t>(src)) * in_, in_ * sizeof(T));
        }
      }
    }
  }
  Tensor<T> out({batch_, steps_, out_});
  auto y = out.matrix(batch_ * steps_);
  y.noalias() = cols_ * kernel_.value.matrix(width);
  y.rowwise() += ConstRowVectorMap<T>(bias_.value.data(), static_cast<Eigen::Index>(out_));
  return out;
}

template <typename T>
Tensor<T> Conv1D<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != batch_ * steps_ * out_) throw ShapeMismatch("conv1d: gradient shape mismatch");
  const std::size_t width = k_ * in_;
  const auto g = grad_out.matrix(batch_ * steps_);
  kernel_.grad.matrix(width).noalias() += cols_.transpose() * g;
  RowVectorMap<T>(bias_.grad.data(), static_cast<Eigen::Index>(out_)) += g.colwise().sum();
  if (!this->input_grad_) return {};

  const Matrix<T> dcols = g * kernel_.value.matrix(width).transpose();
  Tensor<T> dx({batch_, steps_, in_});
  const std::size_t pad_left = k_ / 2;
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t t = 0; t < steps_; ++t) {
      const T* row = dcols.data() + (b * steps_ + t) * width;
      for (std::size_t k = 0; k < k_; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps_)) continue;
        T* dst = dx.data() + (b * steps_ + static_cast<std::size_t>(src)) * in_;
        const T* from = row + k * in_;
        for (std::size_t c = 0; c < in_; ++c) dst[c] += from[c];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- TokenConv1D

template <typename T>
TokenConv1D<T>::TokenConv1D(std::size_t vocab_size, std::size_t embedding_dim, std::size_t out_channels,
                            std::size_t kernel_size)
    : rows_(vocab_size + 1),
      dim_(embedding_dim),
      out_(out_channels),
      k_(kernel_size),
      table_("table", {vocab_size + 1, embedding_dim == 0 ? 1 : embedding_dim}),
      kernel_("kernel", {kernel_size, embedding_dim == 0 ? vocab_size + 1 : embedding_dim, out_channels}),
      bias_("bias", {out_channels}) {
  if (out_channels == 0 || kernel_size == 0) throw ShapeMismatch("token_conv1d: empty kernel");
}

template <typename T>
std::vector<Param<T>*> TokenConv1D<T>::params() {
  if (embedded()) return {&table_, &kernel_, &bias_};
  return {&kernel_, &bias_};
}

template <typename T>
void TokenConv1D<T>::initialize(Rng& rng) {
  // same draws, in the same order, as Embedding then Conv1D
  if (embedded()) uniform_fill(table_.value, 0.05, rng);
  const std::size_t in = embedded() ? dim_ : rows_;
  glorot_uniform(kernel_.value, k_ * in, k_ * out_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor<T> TokenConv1D<T>::forward(const Tensor<T>& tokens, Mode) {
  expect_rank(tokens.shape(), 2, "token_conv1d");
  batch_ = tokens.dim(0);
  steps_ = tokens.dim(1);
  ids_.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) ids_[i] = static_cast<std::uint32_t>(token_at(tokens, i, rows_ - 1));

  const auto rows = static_cast<Eigen::Index>(rows_);
  const auto out = static_cast<Eigen::Index>(out_);
  if (embedded()) {
    lookup_.resize(static_cast<Eigen::Index>(k_) * rows, out);
    const auto table = table_.value.matrix(rows_);
    for (std::size_t k = 0; k < k_; ++k) {
      const ConstMatrixMap<T> w(kernel_.value.data() + k * dim_ * out_, static_cast<Eigen::Index>(dim_), out);
      lookup_.middleRows(static_cast<Eigen::Index>(k) * rows, rows).noalias() = table * w;
    }
  }
  const T* lookup = embedded() ? lookup_.data() : kernel_.value.data();

  Tensor<T> y({batch_, steps_, out_});
  const std::size_t pad_left = k_ / 2;
  for (std::size_t b = 0; b < batch_; ++b) {
    const std::uint32_t* ids = ids_.data() + b * steps_;
    for (std::size_t t = 0; t < steps_; ++t) {
      RowVectorMap<T> row(y.data() + (b * steps_ + t) * out_, out);
      row = ConstRowVectorMap<T>(bias_.value.data(), out);
      for (std::size_t k = 0; k < k_; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps_)) continue;
        row += ConstRowVectorMap<T>(lookup + (k * rows_ + ids[src]) * out_, out);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> TokenConv1D<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != batch_ * steps_ * out_) throw ShapeMismatch("token_conv1d: gradient shape mismatch");
  const auto rows = static_cast<Eigen::Index>(rows_);
  const auto out = static_cast<Eigen::Index>(out_);
  RowVectorMap<T>(bias_.grad.data(), out) += grad_out.matrix(batch_ * steps_).colwise().sum();

  // gradient w.r.t. the lookup tables, scattered by token
  Matrix<T> dlookup = Matrix<T>::Zero(static_cast<Eigen::Index>(k_) * rows, out);
  const std::size_t pad_left = k_ / 2;
  for (std::size_t b = 0; b < batch_; ++b) {
    const std::uint32_t* ids = ids_.data() + b * steps_;
    for (std::size_t t = 0; t < steps_; ++t) {
      const ConstRowVectorMap<T> g(grad_out.data() + (b * steps_ + t) * out_, out);
      for (std::size_t k = 0; k < k_; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad_left);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(steps_)) continue;
        dlookup.row(static_cast<Eigen::Index>(k * rows_ + ids[src])) += g;
      }
    }
  }

  if (!embedded()) {
    kernel_.grad.matrix(k_ * rows_) += dlookup;
    return {};
  }
  const auto table = table_.value.matrix(rows_);
  auto dtable = table_.grad.matrix(rows_);
  for (std::size_t k = 0; k < k_; ++k) {
    const auto dl = dlookup.middleRows(static_cast<Eigen::Index>(k) * rows, rows);
    const ConstMatrixMap<T> w(kernel_.value.data() + k * dim_ * out_, static_cast<Eigen::Index>(dim_), out);
    MatrixMap<T> dw(kernel_.grad.data() + k * dim_ * out_, static_cast<Eigen::Index>(dim_), out);
    dw.noalias() += table.transpose() * dl;
    dtable.noalias() += dl * w.transpose();
  }
  return {};
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, double epsilon, double momentum)
    : channels_(channels),
      epsilon_(epsilon),
      momentum_(momentum),
      gamma_("gamma", {channels}),
      beta_("beta", {channels}),
      running_mean_({channels}, T(0)),
      running_var_({channels}, T(1)),
      updates_({1}, T(0)) {
  gamma_.value.fill(T(1));
}

template <typename T>
void BatchNorm<T>::initialize(Rng&) {
  gamma_.value.fill(T(1));
  beta_.value.fill(T(0));
  running_mean_.fill(T(0));
  running_var_.fill(T(1));
  updates_.fill(T(0));
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.rank() < 2 || x.shape().back() != channels_) {
    throw ShapeMismatch("batchnorm: expected " + std::to_string(channels_) + " channels, got " + to_string(x.shape()));
  }
  const std::size_t c = channels_;
  const std::size_t n = x.size() / c;
  const T* __restrict xd = x.data();
  const T* __restrict gamma = gamma_.value.data();
  const T* __restrict beta = beta_.value.data();
  const double eps = epsilon_;

  // Statistics are accumulated in double whatever T is; the passes below
  // are memory bound, so each one streams the activations exactly once.
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  batch_stats_ = mode != Mode::Infer;
  if (batch_stats_) {
    if (n < 2) throw DegenerateBatch("batchnorm: training needs at least 2 values per channel, got " + std::to_string(n));
    double* __restrict mu = mean.data();
    double* __restrict sq = var.data();
    for (std::size_t r = 0; r < n; ++r) {
      const T* __restrict row = xd + r * c;
      for (std::size_t j = 0; j < c; ++j) mu[j] += row[j];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const T* __restrict row = xd + r * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = row[j] - mu[j];
        sq[j] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(n);  // biased, as in the normalization itself
    if (mode == Mode::Train) {
      // Seeding from the first batch instead of (0, 1): with a small
      // activation scale the initial variance of 1 otherwise dominates the
      // running estimate for hundreds of steps.
      const bool first = updates_[0] == T(0);
      const double m = momentum_;
      for (std::size_t j = 0; j < c; ++j) {
        running_mean_[j] = static_cast<T>(first ? mean[j] : m * running_mean_[j] + (1.0 - m) * mean[j]);
        running_var_[j] = static_cast<T>(first ? var[j] : m * running_var_[j] + (1.0 - m) * var[j]);
      }
      updates_[0] += T(1);
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = running_mean_[j];
      var[j] = running_var_[j];
    }
  }

  inv_std_.resize(static_cast<Eigen::Index>(c));
  std::vector<T> shift(c), istd(c);
  for (std::size_t j = 0; j < c; ++j) {
    istd[j] = static_cast<T>(1.0 / std::sqrt(var[j] + eps));
    shift[j] = static_cast<T>(mean[j]);
    inv_std_[static_cast<Eigen::Index>(j)] = istd[j];
  }
  normalized_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  Tensor<T> out(x.shape());
  T* __restrict xh = normalized_.data();
  T* __restrict od = out.data();
  const T* __restrict sh = shift.data();
  const T* __restrict is = istd.data();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t o = r * c;
    for (std::size_t j = 0; j < c; ++j) {
      const T h = (xd[o + j] - sh[j]) * is[j];
      xh[o + j] = h;
      od[o + j] = h * gamma[j] + beta[j];
    }
  }
  return out;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t c = channels_;
  const std::size_t n = static_cast<std::size_t>(normalized_.rows());
  if (grad_out.size() != n * c) throw ShapeMismatch("batchnorm: gradient shape mismatch");
  const T* __restrict g = grad_out.data();
  const T* __restrict xh = normalized_.data();

  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  double* __restrict sg = sum_g.data();
  double* __restrict sgx = sum_gx.data();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t o = r * c;
    for (std::size_t j = 0; j < c; ++j) {
      sg[j] += g[o + j];
      sgx[j] += static_cast<double>(g[o + j]) * xh[o + j];
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    gamma_.grad[j] += static_cast<T>(sum_gx[j]);
    beta_.grad[j] += static_cast<T>(sum_g[j]);
  }
  if (!this->input_grad_) return {};

  // batch statistics: dx = gamma * inv_std * (g - mean(g) - x_hat * mean(g * x_hat))
  std::vector<T> scale(c), mean_g(c), mean_gx(c);
  for (std::size_t j = 0; j < c; ++j) {
    scale[j] = gamma_.value[j] * inv_std_[static_cast<Eigen::Index>(j)];
    mean_g[j] = batch_stats_ ? static_cast<T>(sum_g[j] / static_cast<double>(n)) : T(0);
    mean_gx[j] = batch_stats_ ? static_cast<T>(sum_gx[j] / static_cast<double>(n)) : T(0);
  }
  Tensor<T> dx(grad_out.shape());
  T* __restrict d = dx.data();
  const T* __restrict sc = scale.data();
  const T* __restrict mg = mean_g.data();
  const T* __restrict mgx = mean_gx.data();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t o = r * c;
    for (std::size_t j = 0; j < c; ++j) d[o + j] = sc[j] * (g[o + j] - mg[j] - xh[o + j] * mgx[j]);
  }
  return dx;
}

// ---------------------------------------------------------------- ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> out(x.shape());
  active_.resize(x.size());
  const T* __restrict xd = x.data();
  T* __restrict od = out.data();
  std::uint8_t* __restrict on = active_.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    on[i] = xd[i] > T(0);
    od[i] = xd[i] > T(0) ? xd[i] : T(0);
  }
  return out;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  if (grad_out.size() != active_.size()) throw ShapeMismatch("relu: gradient shape mismatch");
  Tensor<T> dx(grad_out.shape());
  const T* __restrict g = grad_out.data();
  const std::uint8_t* __restrict on = active_.data();
  T* __restrict d = dx.data();
  for (std::size_t i = 0; i < dx.size(); ++i) d[i] = on[i] ? g[i] : T(0);
  return dx;
}

// ---------------------------------------------------------------- GAP

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 3, "gap");
  input_shape_ = x.shape();
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  Tensor<T> out({b, c});
  for (std::size_t i = 0; i < b; ++i) {
    const auto slice = ConstMatrixMap<T>(x.data() + i * t * c, static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
    RowVectorMap<T>(out.data() + i * c, static_cast<Eigen::Index>(c)) = slice.colwise().mean();
  }
  return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t b = input_shape_.at(0), t = input_shape_.at(1), c = input_shape_.at(2);
  if (grad_out.size() != b * c) throw ShapeMismatch("gap: gradient shape mismatch");
  Tensor<T> dx(input_shape_);
  const T inv = T(1) / static_cast<T>(t);
  for (std::size_t i = 0; i < b; ++i) {
    auto slice = MatrixMap<T>(dx.data() + i * t * c, static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
    slice.rowwise() = ConstRowVectorMap<T>(grad_out.data() + i * c, static_cast<Eigen::Index>(c)) * inv;
  }
  return dx;
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : in_(in_features), out_(out_features), weight_("weight", {in_features, out_features}), bias_("bias", {out_features}) {}

template <typename T>
void Dense<T>::initialize(Rng& rng) {
  glorot_uniform(weight_.value, in_, out_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 2, "dense");
  if (x.dim(1) != in_) {
    throw ShapeMismatch("dense: expected " + std::to_string(in_) + " features, got " + to_string(x.shape()));
  }
  input_ = x;
  Tensor<T> out({x.dim(0), out_});
  auto y = out.matrix(x.dim(0));
  y.noalias() = x.matrix(x.dim(0)) * weight_.value.matrix(in_);
  y.rowwise() += ConstRowVectorMap<T>(bias_.value.data(), static_cast<Eigen::Index>(out_));
  return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t b = input_.dim(0);
  if (grad_out.size() != b * out_) throw ShapeMismatch("dense: gradient shape mismatch");
  const auto g = grad_out.matrix(b);
  weight_.grad.matrix(in_).noalias() += input_.matrix(b).transpose() * g;
  RowVectorMap<T>(bias_.grad.data(), static_cast<Eigen::Index>(out_)) += g.colwise().sum();
  if (!this->input_grad_) return {};
  Tensor<T> dx({b, in_});
  dx.matrix(b).noalias() = g * weight_.value.matrix(in_).transpose();
  return dx;
}

// ---------------------------------------------------------------- LSTM

template <typename T>
LSTM<T>::LSTM(std::size_t input_dim, std::size_t units)
    : input_dim_(input_dim),
      units_(units),
      input_weight_("input_weight", {input_dim, 4 * units}),
      recurrent_weight_("recurrent_weight", {units, 4 * units}),
      bias_("bias", {4 * units}) {}

template <typename T>
void LSTM<T>::initialize(Rng& rng) {
  glorot_uniform(input_weight_.value, input_dim_, 4 * units_, rng);
  glorot_uniform(recurrent_weight_.value, units_, 4 * units_, rng);
  bias_.value.fill(T(0));
  for (std::size_t j = units_; j < 2 * units_; ++j) bias_.value[j] = T(1);  // forget gate
}

namespace {

template <typename Block>
void sigmoid_inplace(Block&& block) {
  using T = typename std::decay_t<Block>::Scalar;
  block = (T(1) + (-block).exp()).inverse();
}

}  // namespace

template <typename T>
Tensor<T> LSTM<T>::forward(const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 3, "lstm");
  if (x.dim(2) != input_dim_) {
    throw ShapeMismatch("lstm: expected " + std::to_string(input_dim_) + " input features, got " + to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1);
  const auto b = static_cast<Eigen::Index>(batch);
  const auto h = static_cast<Eigen::Index>(units_);
  const auto g4 = 4 * h;
  input_ = x;

  const Matrix<T> projected = x.matrix(batch * steps) * input_weight_.value.matrix(input_dim_);  // row = b*T + t
  const auto w_h = recurrent_weight_.value.matrix(units_);
  const ConstRowVectorMap<T> bias(bias_.value.data(), g4);

  gates_.resize(steps);
  cell_tanh_.resize(steps);
  cells_.resize(steps + 1);
  hidden_.resize(steps + 1);
  cells_[0] = Matrix<T>::Zero(b, h);
  hidden_[0] = Matrix<T>::Zero(b, h);

  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::Map<const Matrix<T>, 0, Eigen::OuterStride<>> xw(
        projected.data() + static_cast<Eigen::Index>(t) * g4, b, g4,
        Eigen::OuterStride<>(static_cast<Eigen::Index>(steps) * g4));
    Matrix<T>& z = gates_[t];
    z.noalias() = hidden_[t] * w_h;
    z += xw;
    z.rowwise() += bias;
    sigmoid_inplace(z.leftCols(2 * h).array());
    z.middleCols(2 * h, h).array() = z.middleCols(2 * h, h).array().tanh();
    sigmoid_inplace(z.rightCols(h).array());

    cells_[t + 1].noalias() = (z.middleCols(h, h).array() * cells_[t].array() +
                               z.leftCols(h).array() * z.middleCols(2 * h, h).array())
                                  .matrix();
    cell_tanh_[t] = cells_[t + 1].array().tanh().matrix();
    hidden_[t + 1] = (z.rightCols(h).array() * cell_tanh_[t].array()).matrix();
  }

  Tensor<T> out({batch, units_});
  out.matrix(batch) = hidden_[steps];
  return out;
}

template <typename T>
Tensor<T> LSTM<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t batch = input_.dim(0), steps = input_.dim(1);
  if (grad_out.size() != batch * units_) throw ShapeMismatch("lstm: gradient shape mismatch");
  const auto b = static_cast<Eigen::Index>(batch);
  const auto h = static_cast<Eigen::Index>(units_);
  const auto g4 = 4 * h;
  const auto w_h = recurrent_weight_.value.matrix(units_);
  auto w_h_grad = recurrent_weight_.grad.matrix(units_);

  Matrix<T> dh = grad_out.matrix(batch);
  Matrix<T> dc = Matrix<T>::Zero(b, h);
  Matrix<T> dz(b, g4);
  Matrix<T> dprojected(b * static_cast<Eigen::Index>(steps), g4);

  for (std::size_t t = steps; t-- > 0;) {
    const Matrix<T>& z = gates_[t];
    const auto i = z.leftCols(h).array();
    const auto f = z.middleCols(h, h).array();
    const auto g = z.middleCols(2 * h, h).array();
    const auto o = z.rightCols(h).array();
    const auto tc = cell_tanh_[t].array();

    dc.array() += dh.array() * o * (T(1) - tc.square());
    dz.leftCols(h).array() = dc.array() * g * i * (T(1) - i);
    dz.middleCols(h, h).array() = dc.array() * cells_[t].array() * f * (T(1) - f);
    dz.middleCols(2 * h, h).array() = dc.array() * i * (T(1) - g.square());
    dz.rightCols(h).array() = dh.array() * tc * o * (T(1) - o);

    Eigen::Map<Matrix<T>, 0, Eigen::OuterStride<>>(dprojected.data() + static_cast<Eigen::Index>(t) * g4, b, g4,
                                                    Eigen::OuterStride<>(static_cast<Eigen::Index>(steps) * g4)) = dz;
    w_h_grad.noalias() += hidden_[t].transpose() * dz;
    dh.noalias() = dz * w_h.transpose();
    dc.array() *= f;
  }

  input_weight_.grad.matrix(input_dim_).noalias() += input_.matrix(batch * steps).transpose() * dprojected;
  RowVectorMap<T>(bias_.grad.data(), g4) += dprojected.colwise().sum();
  if (!this->input_grad_) return {};
  Tensor<T> dx(input_.shape());
  dx.matrix(batch * steps).noalias() = dprojected * input_weight_.value.matrix(input_dim_).transpose();
  return dx;
}

// ---------------------------------------------------------------- CorruptedBackward

template <typename T>
Tensor<T> CorruptedBackward<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = inner_->backward(grad_out);
  for (auto& v : dx.values()) v *= factor_;
  for (auto* p : inner_->params()) {
    for (auto& v : p->grad.values()) v *= factor_;
  }
  return dx;
}

#define SEWHAR_INSTANTIATE(T)                                                   \
  template void glorot_uniform<T>(Tensor<T>&, std::size_t, std::size_t, Rng&); \
  template class Embedding<T>;                                                  \
  template class OneHot<T>;                                                     \
  template class IndexInput<T>;                                                 \
  template class Conv1D<T>;                                                     \
  template class TokenConv1D<T>;                                                \
  template class BatchNorm<T>;                                                  \
  template class ReLU<T>;                                                       \
  template class GlobalAvgPool<T>;                                              \
  template class Dense<T>;                                                      \
  template class LSTM<T>;                                                       \
  template class CorruptedBackward<T>;

SEWHAR_INSTANTIATE(float)
SEWHAR_INSTANTIATE(double)

#undef SEWHAR_INSTANTIATE

}  // namespace sewhar::nn
