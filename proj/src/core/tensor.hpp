#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace vggft {

// Dense N-d array, row-major. Activations use NCHW order. float is the
// working precision; double instantiations exist for gradient verification.
template <typename T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(checked_size(shape), T(0));
  }

  TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (checked_size(shape) != data.size())
      fail(ErrorCode::Dimension, "tensor data length " + std::to_string(data.size()) +
                                     " does not match shape " + shape_str());
  }

  static size_t checked_size(const std::vector<int>& s) {
    if (s.empty()) fail(ErrorCode::Dimension, "tensor shape must not be empty");
    uint64_t n = 1;
    for (int d : s) {
      if (d <= 0) fail(ErrorCode::Dimension, "tensor dimensions must be positive");
      n *= static_cast<uint64_t>(d);
    }
    return static_cast<size_t>(n);
  }

  size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& at2(int i, int j) { return data[static_cast<size_t>(i) * dim(1) + j]; }
  const T& at2(int i, int j) const { return data[static_cast<size_t>(i) * dim(1) + j]; }

  T& at3(int c, int h, int w) {
    return data[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
  }
  const T& at3(int c, int h, int w) const {
    return data[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
  }

  T& at4(int n, int c, int h, int w) {
    return data[((static_cast<size_t>(n) * dim(1) + c) * static_cast<size_t>(dim(2)) + h) *
                    dim(3) +
                w];
  }
  const T& at4(int n, int c, int h, int w) const {
    return data[((static_cast<size_t>(n) * dim(1) + c) * static_cast<size_t>(dim(2)) + h) *
                    dim(3) +
                w];
  }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
bool same_shape(const TensorT<T>& a, const TensorT<T>& b) {
  return a.shape == b.shape;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template <typename To, typename From>
TensorT<To> cast_tensor(const TensorT<From>& t) {
  TensorT<To> out(t.shape);
  for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

}  // namespace vggft
