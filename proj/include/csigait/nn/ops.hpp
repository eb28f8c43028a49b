#pragma once

// Stateless layer kernels with explicit forward and backward passes.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "csigait/nn/tensor.hpp"

namespace csigait::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < k) throw ShapeError("kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

// Unfolds one sample (C, H, W) into (C*kh*kw, Ho*Wo).
inline void im2col(const double* x, std::size_t ch, std::size_t h, std::size_t w, std::size_t kh,
                   std::size_t kw, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo,
                   double* col) {
  const std::size_t hw_out = ho * wo;
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        double* dst = col + ((c * kh + ky) * kw + kx) * hw_out;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst + oy * wo, dst + (oy + 1) * wo, 0.0);
            continue;
          }
          const double* src = x + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            dst[oy * wo + ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[ix];
          }
        }
      }
}

// Adjoint of im2col: scatters (C*kh*kw, Ho*Wo) back into (C, H, W).
inline void col2im_add(const double* col, std::size_t ch, std::size_t h, std::size_t w, std::size_t kh,
                       std::size_t kw, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo,
                       double* x) {
  const std::size_t hw_out = ho * wo;
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t ky = 0; ky < kh; ++ky)
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double* src = col + ((c * kh + ky) * kw + kx) * hw_out;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = x + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[oy * wo + ox];
          }
        }
      }
}

}  // namespace detail

// Cross-correlation of x (N, Cin, H, W) with kernels k (Cout, Cin, kh, kw).
inline Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& k, ConvGeometry g) {
  if (x.c != k.c)
    throw ShapeError("conv2d: input " + x.shape_str() + " incompatible with kernels " + k.shape_str());
  if (g.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  const std::size_t ho = conv_out_dim(x.h, k.h, g.stride, g.pad);
  const std::size_t wo = conv_out_dim(x.w, k.w, g.stride, g.pad);
  Tensor4 y(x.n, k.n, ho, wo);
  const auto rows = static_cast<Eigen::Index>(k.c * k.h * k.w);
  const auto cols = static_cast<Eigen::Index>(ho * wo);
  ConstRowMap kmat(k.data.data(), static_cast<Eigen::Index>(k.n), rows);
  std::vector<double> col(static_cast<std::size_t>(rows * cols));
  for (std::size_t i = 0; i < x.n; ++i) {
    detail::im2col(x.sample(i), x.c, x.h, x.w, k.h, k.w, g.stride, g.pad, ho, wo, col.data());
    RowMap(y.sample(i), static_cast<Eigen::Index>(k.n), cols).noalias() =
        kmat * ConstRowMap(col.data(), rows, cols);
  }
  return y;
}

struct ConvGrads {
  Tensor4 grad_x;
  Tensor4 grad_k;
};

// Gradients of sum(grad_out * conv2d_forward(x, k)) with respect to x and k.
inline ConvGrads conv2d_backward(const Tensor4& x, const Tensor4& k, const Tensor4& grad_out, ConvGeometry g) {
  if (x.c != k.c)
    throw ShapeError("conv2d_backward: input " + x.shape_str() + " incompatible with kernels " + k.shape_str());
  const std::size_t ho = conv_out_dim(x.h, k.h, g.stride, g.pad);
  const std::size_t wo = conv_out_dim(x.w, k.w, g.stride, g.pad);
  if (grad_out.n != x.n || grad_out.c != k.n || grad_out.h != ho || grad_out.w != wo)
    throw ShapeError("conv2d_backward: grad_out " + grad_out.shape_str() + " does not match output (" +
                     std::to_string(x.n) + "," + std::to_string(k.n) + "," + std::to_string(ho) + "," +
                     std::to_string(wo) + ")");
  ConvGrads out{zeros_like(x), zeros_like(k)};
  const auto rows = static_cast<Eigen::Index>(k.c * k.h * k.w);
  const auto cols = static_cast<Eigen::Index>(ho * wo);
  const auto cout = static_cast<Eigen::Index>(k.n);
  ConstRowMap kmat(k.data.data(), cout, rows);
  RowMap gk(out.grad_k.data.data(), cout, rows);
  std::vector<double> col(static_cast<std::size_t>(rows * cols));
  RowMat gcol(rows, cols);
  for (std::size_t i = 0; i < x.n; ++i) {
    detail::im2col(x.sample(i), x.c, x.h, x.w, k.h, k.w, g.stride, g.pad, ho, wo, col.data());
    ConstRowMap gy(grad_out.sample(i), cout, cols);
    gk.noalias() += gy * ConstRowMap(col.data(), rows, cols).transpose();
    gcol.noalias() = kmat.transpose() * gy;
    detail::col2im_add(gcol.data(), x.c, x.h, x.w, k.h, k.w, g.stride, g.pad, ho, wo, out.grad_x.sample(i));
  }
  return out;
}

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

enum class Mode { train, infer };

// Per-channel batch-norm state. Running statistics follow
// running = momentum * running + (1 - momentum) * batch.
struct BatchNormParams {
  std::vector<double> gamma, beta, running_mean, running_var;

  explicit BatchNormParams(std::size_t channels = 0)
      : gamma(channels, 1.0), beta(channels, 0.0), running_mean(channels, 0.0), running_var(channels, 1.0) {}
  std::size_t channels() const { return gamma.size(); }
};

// Values kept from a forward pass for the backward pass.
struct BatchNormCache {
  Tensor4 xhat;
  std::vector<double> inv_std;
  Mode mode = Mode::train;
};

// Span-based core so layers can keep gamma/beta in their own tensors.
inline Tensor4 batchnorm_forward(const Tensor4& x, std::span<const double> gamma, std::span<const double> beta,
                                 std::span<double> running_mean, std::span<double> running_var, Mode mode,
                                 BatchNormCache* cache = nullptr, double momentum = kBnMomentum) {
  if (x.c != gamma.size() || x.c != beta.size() || x.c != running_mean.size() || x.c != running_var.size())
    throw ShapeError("batchnorm: input " + x.shape_str() + " has " + std::to_string(x.c) + " channels, params have " +
                     std::to_string(gamma.size()));
  const std::size_t m = x.n * x.h * x.w;
  if (mode == Mode::train && m < 2)
    throw DataError("batchnorm: train mode needs at least two values per channel");
  Tensor4 y = zeros_like(x);
  Tensor4 xhat = zeros_like(x);
  std::vector<double> inv_std(x.c);
  const std::size_t plane = x.plane();
  for (std::size_t ch = 0; ch < x.c; ++ch) {
    double mean, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.n; ++i) {
        const double* v = x.sample(i) + ch * plane;
        for (std::size_t j = 0; j < plane; ++j) s += v[j];
      }
      mean = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t i = 0; i < x.n; ++i) {
        const double* v = x.sample(i) + ch * plane;
        for (std::size_t j = 0; j < plane; ++j) ss += (v[j] - mean) * (v[j] - mean);
      }
      var = ss / static_cast<double>(m);
      running_mean[ch] = momentum * running_mean[ch] + (1.0 - momentum) * mean;
      running_var[ch] = momentum * running_var[ch] +
                        (1.0 - momentum) * var * static_cast<double>(m) / static_cast<double>(m - 1);
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    const double is = 1.0 / std::sqrt(var + kBnEpsilon);
    inv_std[ch] = is;
    for (std::size_t i = 0; i < x.n; ++i) {
      const double* v = x.sample(i) + ch * plane;
      double* xh = xhat.sample(i) + ch * plane;
      double* out = y.sample(i) + ch * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        xh[j] = (v[j] - mean) * is;
        out[j] = gamma[ch] * xh[j] + beta[ch];
      }
    }
  }
  if (cache) *cache = {std::move(xhat), std::move(inv_std), mode};
  return y;
}

inline Tensor4 batchnorm_forward(const Tensor4& x, BatchNormParams& p, Mode mode, BatchNormCache* cache = nullptr,
                                 double momentum = kBnMomentum) {
  return batchnorm_forward(x, p.gamma, p.beta, p.running_mean, p.running_var, mode, cache, momentum);
}

struct BatchNormGrads {
  Tensor4 grad_x;
  std::vector<double> grad_gamma, grad_beta;
};

inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma,
                                         const Tensor4& grad_out) {
  const Tensor4& xhat = cache.xhat;
  require_same_shape(xhat, grad_out, "batchnorm_backward");
  BatchNormGrads g{zeros_like(grad_out), std::vector<double>(gamma.size(), 0.0), std::vector<double>(gamma.size(), 0.0)};
  const std::size_t plane = xhat.plane();
  const double m = static_cast<double>(xhat.n * plane);
  for (std::size_t ch = 0; ch < xhat.c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < xhat.n; ++i) {
      const double* dy = grad_out.sample(i) + ch * plane;
      const double* xh = xhat.sample(i) + ch * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        sum_dy += dy[j];
        sum_dy_xhat += dy[j] * xh[j];
      }
    }
    g.grad_beta[ch] = sum_dy;
    g.grad_gamma[ch] = sum_dy_xhat;
    const double scale = gamma[ch] * cache.inv_std[ch];
    for (std::size_t i = 0; i < xhat.n; ++i) {
      const double* dy = grad_out.sample(i) + ch * plane;
      const double* xh = xhat.sample(i) + ch * plane;
      double* dx = g.grad_x.sample(i) + ch * plane;
      if (cache.mode == Mode::train) {
        for (std::size_t j = 0; j < plane; ++j)
          dx[j] = scale * (dy[j] - sum_dy / m - xh[j] * sum_dy_xhat / m);
      } else {
        for (std::size_t j = 0; j < plane; ++j) dx[j] = scale * dy[j];
      }
    }
  }
  return g;
}

inline BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                         const Tensor4& grad_out) {
  return batchnorm_backward(cache, p.gamma, grad_out);
}

inline Tensor4 relu(const Tensor4& x) {
  Tensor4 y = x;
  for (auto& v : y.data) v = v > 0 ? v : 0.0;
  return y;
}

inline Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor4 g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(x.data[i] > 0)) g.data[i] = 0.0;
  return g;
}

// Max pooling with implicit -inf padding. `argmax` records the flat input
// index chosen for every output; ties keep the first candidate.
inline Tensor4 maxpool_forward(const Tensor4& x, std::size_t size, std::size_t stride, std::size_t pad,
                               std::vector<std::size_t>* argmax = nullptr) {
  const std::size_t ho = conv_out_dim(x.h, size, stride, pad);
  const std::size_t wo = conv_out_dim(x.w, size, stride, pad);
  Tensor4 y(x.n, x.c, ho, wo);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t ch = 0; ch < x.c; ++ch)
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t ky = 0; ky < size; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(x.h)) continue;
            for (std::size_t kx = 0; kx < size; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(x.w)) continue;
              const std::size_t idx = ((i * x.c + ch) * x.h + static_cast<std::size_t>(iy)) * x.w + static_cast<std::size_t>(ix);
              if (x.data[idx] > best) {
                best = x.data[idx];
                best_idx = idx;
              }
            }
          }
          y.data[o] = best;
          if (argmax) (*argmax)[o] = best_idx;
        }
  return y;
}

inline Tensor4 maxpool_backward(const Tensor4& x, const std::vector<std::size_t>& argmax, const Tensor4& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool_backward: argmax size mismatch");
  Tensor4 g = zeros_like(x);
  for (std::size_t o = 0; o < grad_out.size(); ++o) g.data[argmax[o]] += grad_out.data[o];
  return g;
}

// (N, C, H, W) -> (N, C, 1, 1)
inline Tensor4 global_avgpool_forward(const Tensor4& x) {
  Tensor4 y(x.n, x.c, 1, 1);
  const std::size_t plane = x.plane();
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t ch = 0; ch < x.c; ++ch) {
      const double* v = x.sample(i) + ch * plane;
      double s = 0.0;
      for (std::size_t j = 0; j < plane; ++j) s += v[j];
      y(i, ch, 0, 0) = s / static_cast<double>(plane);
    }
  return y;
}

inline Tensor4 global_avgpool_backward(const Tensor4& x, const Tensor4& grad_out) {
  Tensor4 g = zeros_like(x);
  const std::size_t plane = x.plane();
  const double inv = 1.0 / static_cast<double>(plane);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t ch = 0; ch < x.c; ++ch) {
      double* v = g.sample(i) + ch * plane;
      const double d = grad_out(i, ch, 0, 0) * inv;
      for (std::size_t j = 0; j < plane; ++j) v[j] = d;
    }
  return g;
}

// y = x W^T + b with x (N, in, 1, 1) viewed as N x in, W (out, in, 1, 1).
inline Tensor4 dense_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias) {
  const std::size_t in = x.c * x.h * x.w;
  if (in != weight.c || bias.n != weight.n)
    throw ShapeError("dense: input " + x.shape_str() + " incompatible with weight " + weight.shape_str());
  Tensor4 y(x.n, weight.n, 1, 1);
  const auto n = static_cast<Eigen::Index>(x.n), o = static_cast<Eigen::Index>(weight.n);
  RowMap ym(y.data.data(), n, o);
  ym.noalias() = ConstRowMap(x.data.data(), n, static_cast<Eigen::Index>(in)) *
                 ConstRowMap(weight.data.data(), o, static_cast<Eigen::Index>(in)).transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < o; ++j) ym(i, j) += bias.data[static_cast<std::size_t>(j)];
  return y;
}

struct DenseGrads {
  Tensor4 grad_x, grad_w, grad_b;
};

inline DenseGrads dense_backward(const Tensor4& x, const Tensor4& weight, const Tensor4& grad_out) {
  const std::size_t in = x.c * x.h * x.w;
  if (grad_out.n != x.n || grad_out.c != weight.n || in != weight.c)
    throw ShapeError("dense_backward: grad_out " + grad_out.shape_str() + " incompatible with weight " +
                     weight.shape_str());
  DenseGrads g{zeros_like(x), zeros_like(weight), Tensor4(weight.n, 1, 1, 1)};
  const auto n = static_cast<Eigen::Index>(x.n), o = static_cast<Eigen::Index>(weight.n),
             k = static_cast<Eigen::Index>(in);
  ConstRowMap gy(grad_out.data.data(), n, o);
  RowMap(g.grad_x.data.data(), n, k).noalias() = gy * ConstRowMap(weight.data.data(), o, k);
  RowMap(g.grad_w.data.data(), o, k).noalias() = gy.transpose() * ConstRowMap(x.data.data(), n, k);
  for (Eigen::Index j = 0; j < o; ++j) g.grad_b.data[static_cast<std::size_t>(j)] = gy.col(j).sum();
  return g;
}

// Row-wise softmax of an (N, C) logit block, stabilized by the row max.
inline std::vector<double> softmax_rows(std::span<const double> logits, std::size_t classes) {
  std::vector<double> p(logits.size());
  for (std::size_t r = 0; r * classes < logits.size(); ++r) {
    const double* z = logits.data() + r * classes;
    const double mx = *std::max_element(z, z + classes);
    double s = 0.0;
    for (std::size_t j = 0; j < classes; ++j) s += (p[r * classes + j] = std::exp(z[j] - mx));
    for (std::size_t j = 0; j < classes; ++j) p[r * classes + j] /= s;
  }
  return p;
}

struct LossResult {
  double loss = 0.0;
  Tensor4 grad_logits;  // (N, C, 1, 1)
  std::vector<double> probs;
};

// Mean negative log-likelihood; gradient (softmax - onehot) / N.
inline LossResult softmax_cross_entropy(const Tensor4& logits, std::span<const int> labels) {
  const std::size_t n = logits.n, c = logits.c * logits.h * logits.w;
  if (labels.size() != n) throw ShapeError("softmax_cross_entropy: label count differs from batch size");
  LossResult r;
  r.probs = softmax_rows(logits.data, c);
  r.grad_logits = Tensor4(n, c, 1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw ParameterError("softmax_cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    const double* z = logits.data.data() + i * c;
    const double mx = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z[j] - mx);
    r.loss += -(z[labels[i]] - mx - std::log(s));
    for (std::size_t j = 0; j < c; ++j)
      r.grad_logits.data[i * c + j] = (r.probs[i * c + j] - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0)) /
                                      static_cast<double>(n);
  }
  r.loss /= static_cast<double>(n);
  return r;
}

}  // namespace csigait::nn
