#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mgvsr/error.hpp"

namespace mgvsr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array. Frames are N x C x H x W, clips T x N x C x H x W.
/// Value semantics: copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  const T& at4(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  /// Sub-tensor at index i of the leading dimension (copy).
  Tensor slice0(std::size_t i) const {
    if (shape_.empty() || i >= shape_[0]) {
      throw OutOfRange("slice index " + std::to_string(i) + " outside " + shape_str(shape_));
    }
    Shape inner(shape_.begin() + 1, shape_.end());
    const std::size_t stride = shape_numel(inner);
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(i * stride);
    return Tensor(std::move(inner), std::vector<T>(first, first + static_cast<std::ptrdiff_t>(stride)));
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T scale) {
    for (auto& v : data_) v *= scale;
    return *this;
  }

  void require_same_shape(const Tensor& other, const char* where) const {
    if (shape_ != other.shape_) {
      throw ShapeError(std::string(where) + ": shape " + shape_str(shape_) + " vs " +
                       shape_str(other.shape_));
    }
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Stack equally-shaped tensors along a new leading dimension.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw InvalidArgument("stack: no tensors given");
  Shape shape = parts.front().shape();
  std::vector<T> data;
  data.reserve(parts.size() * parts.front().size());
  for (const auto& p : parts) {
    p.require_same_shape(parts.front(), "stack");
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  shape.insert(shape.begin(), parts.size());
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  return stack(std::span<const Tensor<T>>(parts));
}

/// Inverse of stack: one tensor per entry of the leading dimension.
template <typename T>
std::vector<Tensor<T>> unstack(const Tensor<T>& t) {
  if (t.rank() == 0) throw ShapeError("unstack: rank-0 tensor");
  std::vector<Tensor<T>> out;
  out.reserve(t.dim(0));
  for (std::size_t i = 0; i < t.dim(0); ++i) out.push_back(t.slice0(i));
  return out;
}

template <typename T>
double squared_norm(const Tensor<T>& t) {
  double acc = 0.0;
  for (T v : t.data()) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc;
}

}  // namespace mgvsr
