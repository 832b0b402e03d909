#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "cube3d/error.hpp"
#include "cube3d/gemm.hpp"

namespace cube3d {

inline constexpr std::size_t kMaxRank = 5;

// Ordered list of extents, rank 1..5, every extent >= 1. A default-constructed
// Shape is the empty (rank 0) shape of a default-constructed Tensor.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > kMaxRank)
      fail(ErrorKind::invalid_shape, "rank " + std::to_string(dims_.size()) + " outside 1.." +
                                         std::to_string(kMaxRank));
    std::size_t count = 1;
    for (std::size_t d : dims_) {
      if (d == 0) fail(ErrorKind::invalid_shape, "zero extent in " + to_string());
      if (count > static_cast<std::size_t>(-1) / d)
        fail(ErrorKind::invalid_shape, "element count overflows in " + to_string());
      count *= d;
    }
    numel_ = count;
  }

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t numel() const noexcept { return numel_; }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  std::span<const std::size_t> dims() const noexcept { return dims_; }
  std::size_t back() const { return dims_.back(); }

  // Elements between consecutive indices of `axis`.
  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t i = axis + 1; i < dims_.size(); ++i) s *= dims_[i];
    return s;
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) out += 'x';
      out += std::to_string(dims_[i]);
    }
    return out.empty() ? "()" : out;
  }

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  std::vector<std::size_t> dims_;
  std::size_t numel_ = 0;
};

template <typename T>
concept Real = std::is_floating_point_v<T>;

// Dense row-major tensor, last axis fastest. No broadcasting anywhere.
template <Real T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

  static Tensor from(Shape shape, std::vector<T> data) {
    if (data.size() != shape.numel())
      fail(ErrorKind::shape, "data length " + std::to_string(data.size()) + " does not match shape " +
                                 shape.to_string());
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) fail(ErrorKind::shape, "index rank mismatch for " + shape_.to_string());
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis]) fail(ErrorKind::shape, "index out of range on axis " + std::to_string(axis));
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }
  T& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
  const T& at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape shape) const {
    if (shape.numel() != size())
      fail(ErrorKind::shape, "cannot reshape " + shape_.to_string() + " to " + shape.to_string());
    return from(std::move(shape), data_);
  }

  template <Real U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>::from(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <Real T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!(a.shape() == b.shape()))
    fail(ErrorKind::shape, std::string(what) + ": " + a.shape().to_string() + " vs " + b.shape().to_string());
}

// Reverses element order along `axis`.
template <Real T>
Tensor<T> flip(const Tensor<T>& t, std::size_t axis) {
  if (axis >= t.rank())
    fail(ErrorKind::axis, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(t.rank()));
  const std::size_t extent = t.dim(axis);
  const std::size_t inner = t.shape().stride(axis);
  const std::size_t outer = t.size() / (extent * inner);
  Tensor<T> out(t.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    const T* src = t.raw() + o * extent * inner;
    T* dst = out.raw() + o * extent * inner;
    for (std::size_t i = 0; i < extent; ++i)
      std::copy_n(src + (extent - 1 - i) * inner, inner, dst + i * inner);
  }
  return out;
}

using PadSpec = std::vector<std::pair<std::size_t, std::size_t>>;

namespace detail {

// Moves the box of `big` starting at `origin` with the extents of `small`,
// row by row. gather: big -> small; otherwise small -> big.
template <Real T>
void copy_box(T* big, const Shape& big_shape, T* small, const Shape& small_shape,
              const std::vector<std::size_t>& origin, bool gather) {
  const std::size_t rank = small_shape.rank();
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t row = small_shape[rank - 1];
  const std::size_t rows = small_shape.numel() / row;
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t rem = r;
    for (std::size_t a = rank - 1; a-- > 0;) {
      idx[a] = rem % small_shape[a];
      rem /= small_shape[a];
    }
    std::size_t off = 0;
    for (std::size_t a = 0; a + 1 < rank; ++a) off = off * big_shape[a] + idx[a] + origin[a];
    off = off * big_shape[rank - 1] + origin[rank - 1];
    if (gather)
      std::copy_n(big + off, row, small + r * row);
    else
      std::copy_n(small + r * row, row, big + off);
  }
}

}  // namespace detail

// Grows every axis by (before, after) and fills the border with `value`.
template <Real T>
Tensor<T> pad(const Tensor<T>& t, const PadSpec& before_after, T value) {
  if (before_after.size() != t.rank())
    fail(ErrorKind::shape, "pad spec has " + std::to_string(before_after.size()) + " axes for rank " +
                               std::to_string(t.rank()));
  std::vector<std::size_t> dims(t.rank());
  std::vector<std::size_t> origin(t.rank());
  for (std::size_t a = 0; a < t.rank(); ++a) {
    dims[a] = t.dim(a) + before_after[a].first + before_after[a].second;
    origin[a] = before_after[a].first;
  }
  Tensor<T> out(Shape(dims), value);
  detail::copy_box(out.raw(), out.shape(), const_cast<T*>(t.raw()), t.shape(), origin, false);
  return out;
}

// Inverse of pad: strips (before, after) from every axis.
template <Real T>
Tensor<T> crop(const Tensor<T>& t, const PadSpec& before_after) {
  if (before_after.size() != t.rank()) fail(ErrorKind::shape, "crop spec rank mismatch");
  std::vector<std::size_t> dims(t.rank());
  std::vector<std::size_t> origin(t.rank());
  for (std::size_t a = 0; a < t.rank(); ++a) {
    const auto [b, e] = before_after[a];
    if (b + e >= t.dim(a)) fail(ErrorKind::shape, "crop removes whole axis " + std::to_string(a));
    dims[a] = t.dim(a) - b - e;
    origin[a] = b;
  }
  Tensor<T> out{Shape(dims)};
  detail::copy_box(const_cast<T*>(t.raw()), t.shape(), out.raw(), out.shape(), origin, true);
  return out;
}

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) fail(ErrorKind::shape, "matmul needs rank-2 operands");
  if (a.dim(1) != b.dim(0))
    fail(ErrorKind::shape, "matmul inner extents " + a.shape().to_string() + " x " + b.shape().to_string());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> c(Shape{m, n});
  gemm::accumulate<T>(m, n, k, gemm::MatrixView<T>{a.raw(), k, 1}, b.raw(), n, c.raw(), n);
  return c;
}

template <Real T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) fail(ErrorKind::shape, "transpose needs rank 2");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

}  // namespace cube3d
