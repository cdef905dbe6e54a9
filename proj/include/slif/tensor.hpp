#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "slif/errors.hpp"

namespace slif {

// Dense row-major tensor. Rank 0..3; almost everything in the model is a
// matrix, scalars are rank-0 with one element. Templated on the element type
// so the same op kernels can run in float (training) and double (the
// finite-difference oracle path).
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(numel_of(shape_)), T(0));
  }

  static TensorT zeros(std::vector<int64_t> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<int64_t> shape, T v) {
    TensorT t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static TensorT scalar(T v) {
    TensorT t{std::vector<int64_t>{}};
    t.data_[0] = v;
    return t;
  }

  static TensorT from_data(std::vector<int64_t> shape, std::vector<T> data) {
    if (numel_of(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape (numel " + std::to_string(numel_of(shape)) + ")");
    TensorT t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  template <typename U>
  static TensorT from(const TensorT<U>& other) {
    TensorT t;
    t.shape_ = other.shape();
    t.data_.resize(other.data().size());
    for (size_t i = 0; i < t.data_.size(); ++i) t.data_[i] = static_cast<T>(other.data()[i]);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }

  // 2-D views; a rank-0/1 tensor reads as a single row.
  int64_t rows() const { return rank() >= 2 ? shape_[0] : (rank() == 1 ? shape_[0] : 1); }
  int64_t cols() const {
    if (rank() >= 2) return numel() / shape_[0];
    return rank() == 1 ? 1 : 1;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  const T& at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

  std::span<T> row(int64_t r) { return {ptr() + r * cols(), static_cast<size_t>(cols())}; }
  std::span<const T> row(int64_t r) const {
    return {ptr() + r * cols(), static_cast<size_t>(cols())};
  }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor with numel != 1");
    return data_[0];
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  static int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

}  // namespace slif
