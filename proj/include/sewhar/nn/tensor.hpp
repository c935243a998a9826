#pragma once

#include "sewhar/error.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace sewhar::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape);

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;
template <typename T>
using RowVectorMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using ConstRowVectorMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

// Dense row-major array. The last dimension is contiguous.
//
// Storage is aligned to the widest SIMD packet. Eigen peels scalar iterations
// up to the first aligned element, so with heap-dependent alignment the same
// computation could round differently from run to run.
template <typename T>
class Tensor {
 public:
  using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(element_count(shape_), fill) {
    for (auto d : shape_) {
      if (d == 0) throw ShapeMismatch("tensor dimensions must be at least 1, got " + to_string(shape_));
    }
  }
  Tensor(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (element_count(shape_) != data_.size()) {
      throw ShapeMismatch("shape " + to_string(shape_) + " does not match " + std::to_string(data_.size()) +
                          " values");
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  std::vector<T> to_vector() const { return {data_.begin(), data_.end()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Reinterprets the same values under a new shape of equal element count.
  void reshape(Shape shape) {
    if (element_count(shape) != data_.size()) {
      throw ShapeMismatch("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    shape_ = std::move(shape);
  }

  // Views the data as rows x (size / rows); rows must divide size.
  MatrixMap<T> matrix(std::size_t rows) {
    return MatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(data_.size() / rows));
  }
  ConstMatrixMap<T> matrix(std::size_t rows) const {
    return ConstMatrixMap<T>(data_.data(), static_cast<Eigen::Index>(rows),
                             static_cast<Eigen::Index>(data_.size() / rows));
  }
  // Collapses all leading dimensions into rows.
  MatrixMap<T> rows_by_last() { return matrix(data_.size() / shape_.back()); }
  ConstMatrixMap<T> rows_by_last() const { return matrix(data_.size() / shape_.back()); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  Storage data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> data(t.values().begin(), t.values().end());
  return Tensor<To>(t.shape(), std::move(data));
}

}  // namespace sewhar::nn
