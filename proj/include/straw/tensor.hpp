#pragma once

#include <cstring>
#include <initializer_list>
#include <vector>

#include "straw/common.hpp"

namespace straw {

// Dense row-major tensor. Float instantiation is the compute type for
// training; the double instantiation backs finite-difference checking.
template <class T>
struct TensorT {
  std::vector<size_t> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  TensorT(std::vector<size_t> s, std::initializer_list<T> vals) : shape(std::move(s)) {
    data.assign(vals);
    STRAW_CHECK(data.size() == numel_of(shape), "tensor init size mismatch");
  }

  static size_t numel_of(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  size_t numel() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape.at(i); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }

  T& operator()(size_t i, size_t j) { return data[i * shape[1] + j]; }
  const T& operator()(size_t i, size_t j) const { return data[i * shape[1] + j]; }

  T& operator()(size_t i, size_t j, size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  const T& operator()(size_t i, size_t j, size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  T& operator()(size_t i, size_t j, size_t k, size_t l) {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  const T& operator()(size_t i, size_t j, size_t k, size_t l) const {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  void add(const TensorT& o) {
    STRAW_CHECK(same_shape(o), "tensor add shape mismatch");
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  }

  void scale(T s) {
    for (auto& v : data) v *= s;
  }

  bool all_finite() const {
    for (T v : data)
      if (!is_finite(v)) return false;
    return true;
  }

  bool operator==(const TensorT& o) const { return shape == o.shape && data == o.data; }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class To, class From>
TensorT<To> tensor_cast(const TensorT<From>& a) {
  TensorT<To> out(a.shape);
  for (size_t i = 0; i < a.numel(); ++i) out.data[i] = static_cast<To>(a.data[i]);
  return out;
}

template <class T>
T dot_all(const TensorT<T>& a, const TensorT<T>& b) {
  STRAW_CHECK(a.same_shape(b), "dot_all shape mismatch");
  T s = T(0);
  for (size_t i = 0; i < a.numel(); ++i) s += a.data[i] * b.data[i];
  return s;
}

}  // namespace straw
