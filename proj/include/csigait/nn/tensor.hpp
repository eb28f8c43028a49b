#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csigait/error.hpp"

namespace csigait::nn {

// Dense NCHW tensor. Parameters reuse it with trailing unit dims, e.g. a dense
// weight is (out, in, 1, 1) and a per-channel vector is (C, 1, 1, 1).
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, fill) {
    if (n_ == 0 || c_ == 0 || h_ == 0 || w_ == 0) throw ShapeError("tensor dims must be >= 1, got " + shape_str());
  }

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return h * w; }
  std::array<std::size_t, 4> dims() const { return {n, c, h, w}; }
  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  double& operator()(std::size_t i, std::size_t j, std::size_t y, std::size_t x) {
    return data[((i * c + j) * h + y) * w + x];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t y, std::size_t x) const {
    return data[((i * c + j) * h + y) * w + x];
  }

  double* sample(std::size_t i) { return data.data() + i * c * h * w; }
  const double* sample(std::size_t i) const { return data.data() + i * c * h * w; }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;
};

inline Tensor4 zeros_like(const Tensor4& t) { return Tensor4(t.n, t.c, t.h, t.w); }

inline void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// A learnable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor4 value;
  Tensor4 grad;

  Param() = default;
  Param(std::string n, Tensor4 v) : name(std::move(n)), value(std::move(v)), grad(zeros_like(value)) {}
};

}  // namespace csigait::nn
