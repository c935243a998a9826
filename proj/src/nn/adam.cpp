#include "sewhar/nn/adam.hpp"

#include <cmath>

namespace sewhar::nn {

template <typename T>
void Adam<T>::step(std::span<Param<T>* const> params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) {
    throw ShapeMismatch("adam: optimizer tracks " + std::to_string(m_.size()) + " tensors, got " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != m_[i].shape() || params[i]->grad.shape() != m_[i].shape()) {
      throw ShapeMismatch("adam: shape of '" + params[i]->name + "' changed to " + to_string(params[i]->value.shape()));
    }
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
  const T lr = static_cast<T>(config_.learning_rate);
  const T eps = static_cast<T>(config_.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    T* value = params[i]->value.data();
    const T* grad = params[i]->grad.data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = m_[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      const T g = grad[j];
      m[j] = b1 * m[j] + (T(1) - b1) * g;
      v[j] = b2 * v[j] + (T(1) - b2) * g * g;
      value[j] -= lr * (m[j] / correction1) / (std::sqrt(v[j] / correction2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::uint64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
  if (m.size() != v.size()) throw ShapeMismatch("adam: moment lists differ in length");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].shape() != v[i].shape()) throw ShapeMismatch("adam: moment shapes differ");
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace sewhar::nn
