#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqad/error.hpp"

namespace vqad::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. Models run on BasicTensor<float>; the double
/// instantiation exists for gradient verification.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_size(shape_) != data_.size()) {
      throw UsageError("tensor: shape " + shape_string(shape_) + " does not match " +
                       std::to_string(data_.size()) + " values");
    }
  }
  BasicTensor(Shape shape, std::initializer_list<T> values)
      : BasicTensor(std::move(shape), std::vector<T>(values)) {}

  static BasicTensor scalar(T value) { return BasicTensor({1}, {value}); }

  /// Elementwise conversion between precisions.
  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  /// Value of a single-element tensor.
  T item() const {
    if (data_.size() != 1) throw UsageError("tensor: item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  /// Same data, new extents; the element count must match.
  BasicTensor reshaped(Shape shape) const& {
    BasicTensor copy = *this;
    return std::move(copy).reshaped(std::move(shape));
  }
  BasicTensor reshaped(Shape shape) && {
    if (shape_size(shape) != data_.size()) {
      throw UsageError("tensor: cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
  }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(T value) {
    for (auto& v : data_) v = value;
  }

  /// Elementwise this += other (same shape).
  void accumulate(const BasicTensor& other) {
    if (other.shape_ != shape_) {
      throw UsageError("tensor: accumulate " + shape_string(other.shape_) + " into " + shape_string(shape_));
    }
    T* dst = data_.data();
    const T* src = other.data_.data();
    for (std::size_t i = 0; i < data_.size(); ++i) dst[i] += src[i];
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace vqad::ad
