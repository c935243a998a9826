#include "sewhar/nn/sequential.hpp"

namespace sewhar::nn {

template <typename T>
Sequential<T>::Sequential(const Sequential& other) : shapes_(other.shapes_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& input, Mode mode) {
  shapes_.clear();
  Tensor<T> x = input;
  for (auto& l : layers_) {
    x = l->forward(x, mode);
    shapes_.push_back(x.shape());
  }
  return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_output) {
  Tensor<T> g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
    if (g.empty()) break;
  }
  return g;
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_) {
    for (auto* p : l->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Sequential<T>::buffers() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (auto& l : layers_) {
    for (auto& b : l->buffers()) out.push_back(b);
  }
  return out;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto* p : params()) p->grad.fill(T(0));
}

template <typename T>
void Sequential<T>::initialize(Rng& rng) {
  for (auto& l : layers_) l->initialize(rng);
}

template <typename T>
std::size_t Sequential<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : params()) n += p->value.size();
  return n;
}

template class Sequential<float>;
template class Sequential<double>;

}  // namespace sewhar::nn
