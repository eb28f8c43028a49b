#pragma once

// Short-time Fourier spectrograms, PCA projection of CSI samples and the
// theoretical Doppler overlay.

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "csigait/error.hpp"
#include "csigait/matrix.hpp"
#include "csigait/synth.hpp"

namespace csigait {

inline constexpr std::size_t kDefaultStftWindow = 256;
inline constexpr std::size_t kDefaultStftHop = 64;

struct Spectrogram {
  Matrix power;  // bins x frames
  std::vector<double> freqs_hz;
  std::vector<double> times_s;
  double fs_hz = 0.0;

  std::size_t bins() const { return power.rows; }
  std::size_t frames() const { return power.cols; }
  double bin_width() const { return freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : fs_hz; }
};

namespace detail {

// Owns an FFTW real-to-complex plan and its buffers.
class RealFft {
public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(fftw_alloc_real(n)),
        out_(fftw_alloc_complex(n / 2 + 1)),
        plan_(fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE)) {
    if (!in_ || !out_ || !plan_) throw Error("FFTW plan allocation failed");
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(out_);
    fftw_free(in_);
  }

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(std::size_t k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }
  std::size_t size() const { return n_; }

private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace detail

// Periodic Hanning taper used for STFT framing.
inline std::vector<double> stft_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

// One-sided power spectrogram. Each frame has its mean removed and is
// Hanning-tapered before the FFT; power is |X_k|^2, unscaled.
inline Spectrogram stft_spectrogram(std::span<const double> series, double fs_hz,
                                    std::size_t window = kDefaultStftWindow,
                                    std::size_t hop = kDefaultStftHop) {
  if (window < 2 || window > series.size())
    throw ParameterError("STFT window " + std::to_string(window) + " invalid for series of length " +
                         std::to_string(series.size()));
  if (hop < 1) throw ParameterError("STFT hop must be >= 1");
  if (!(fs_hz > 0)) throw ParameterError("sample rate must be positive");

  const std::size_t bins = window / 2 + 1;
  const std::size_t frames = (series.size() - window) / hop + 1;
  Spectrogram s;
  s.fs_hz = fs_hz;
  s.power = Matrix(bins, frames);
  s.freqs_hz.resize(bins);
  s.times_s.resize(frames);
  for (std::size_t k = 0; k < bins; ++k) s.freqs_hz[k] = static_cast<double>(k) * fs_hz / static_cast<double>(window);

  const auto taper = stft_window(window);
  detail::RealFft fft(window);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* x = series.data() + f * hop;
    double mean = 0.0;
    for (std::size_t i = 0; i < window; ++i) mean += x[i];
    mean /= static_cast<double>(window);
    for (std::size_t i = 0; i < window; ++i) fft.input()[i] = (x[i] - mean) * taper[i];
    fft.execute();
    for (std::size_t k = 0; k < bins; ++k) s.power(k, f) = fft.power(k);
    s.times_s[f] = (static_cast<double>(f * hop) + static_cast<double>(window) / 2.0) / fs_hz;
  }
  return s;
}

// Frequency of the strongest bin in each frame; ties go to the lower bin.
inline std::vector<double> ridge_frequencies(const Spectrogram& s) {
  std::vector<double> ridge(s.frames());
  for (std::size_t f = 0; f < s.frames(); ++f) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.bins(); ++k)
      if (s.power(k, f) > s.power(best, f)) best = k;
    ridge[f] = s.freqs_hz[best];
  }
  return ridge;
}

struct PcaResult {
  Matrix components;                // k x cols, row i = time series of component i
  Matrix eigenvectors;              // rows x k, column i = loading of component i
  std::vector<double> eigenvalues;  // all eigenvalues, descending
  double total_variance = 0.0;      // trace of the covariance
};

// Treats rows as variables and columns as observations. Rows are centered, the
// covariance (normalized by cols - 1) is eigendecomposed, and the top-k
// eigenvectors project the centered data. Each eigenvector is signed so its
// largest-magnitude entry is positive.
inline PcaResult pca(const Matrix& sample, std::size_t k) {
  if (k < 1 || k > sample.rows)
    throw ParameterError("PCA component count " + std::to_string(k) + " outside 1.." +
                         std::to_string(sample.rows));
  if (sample.cols < 2) throw ParameterError("PCA needs at least two observations");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> x(sample.data.data(), static_cast<Eigen::Index>(sample.rows),
                             static_cast<Eigen::Index>(sample.cols));
  const Eigen::VectorXd mean = x.rowwise().mean();
  const RowMat centered = x.colwise() - mean;
  const Eigen::MatrixXd cov =
      (centered * centered.transpose()) / static_cast<double>(sample.cols - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");

  const auto n = static_cast<Eigen::Index>(sample.rows);
  PcaResult out;
  out.eigenvalues.resize(sample.rows);
  for (Eigen::Index i = 0; i < n; ++i) out.eigenvalues[static_cast<std::size_t>(i)] = eig.eigenvalues()(n - 1 - i);
  out.total_variance = cov.trace();

  Eigen::MatrixXd vecs(n, static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::VectorXd v = eig.eigenvectors().col(n - 1 - static_cast<Eigen::Index>(i));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    vecs.col(static_cast<Eigen::Index>(i)) = v;
  }
  const RowMat proj = vecs.transpose() * centered;

  out.components = Matrix(k, sample.cols);
  Eigen::Map<RowMat>(out.components.data.data(), static_cast<Eigen::Index>(k),
                     static_cast<Eigen::Index>(sample.cols)) = proj;
  out.eigenvectors = Matrix(sample.rows, k);
  Eigen::Map<RowMat>(out.eigenvectors.data.data(), n, static_cast<Eigen::Index>(k)) = vecs;
  return out;
}

inline Matrix pca_project(const Matrix& sample, std::size_t k) { return pca(sample, k).components; }

// |Doppler shift| at each time.
inline std::vector<double> doppler_overlay(const WalkScenario& s, std::span<const double> times) {
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = std::abs(doppler_shift(s, times[i]));
  return out;
}

// Layer i is the spectrogram of PCA component i.
struct SpectrogramTensor {
  std::vector<Spectrogram> layers;

  std::size_t depth() const { return layers.size(); }
};

inline SpectrogramTensor spectrogram_tensor(const Matrix& sample, std::size_t k, double fs_hz,
                                            std::size_t window = kDefaultStftWindow,
                                            std::size_t hop = kDefaultStftHop) {
  const Matrix comps = pca_project(sample, k);
  SpectrogramTensor t;
  t.layers.reserve(k);
  for (std::size_t i = 0; i < k; ++i) t.layers.push_back(stft_spectrogram(comps.row(i), fs_hz, window, hop));
  return t;
}

// Log-power image in [0, 255], row 0 = highest frequency. Values below
// `dynamic_range_db` under the image max map to 0.
inline Matrix spectrogram_image(const Spectrogram& s, double dynamic_range_db = 60.0) {
  Matrix img(s.bins(), s.frames());
  const double peak = *std::max_element(s.power.data.begin(), s.power.data.end());
  if (!(peak > 0)) return img;
  const double floor_db = -dynamic_range_db;
  for (std::size_t k = 0; k < s.bins(); ++k)
    for (std::size_t f = 0; f < s.frames(); ++f) {
      const double p = s.power(k, f);
      const double db = p > 0 ? 10.0 * std::log10(p / peak) : floor_db;
      img(s.bins() - 1 - k, f) = std::round(255.0 * std::clamp((db - floor_db) / dynamic_range_db, 0.0, 1.0));
    }
  return img;
}

}  // namespace csigait
