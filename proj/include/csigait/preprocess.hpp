#pragma once

// Sanitization pipeline: magnitude -> mean imputation -> Hanning denoise ->
// decimation -> train-only mean centering and scaling.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csigait/csi_log.hpp"
#include "csigait/error.hpp"
#include "csigait/matrix.hpp"

namespace csigait {

inline constexpr std::size_t kDefaultWindow = 91;
inline constexpr std::size_t kDefaultDecimation = 16;

// Real matrix with the presence mask carried over from the raw sample.
struct MaskedMatrix {
  Matrix values;
  std::vector<std::uint8_t> present;

  bool is_present(std::size_t r, std::size_t c) const { return present[r * values.cols + c] != 0; }
};

struct CleanSample {
  Matrix data;
  std::optional<int> label;
};

// Training and test partitions are distinct types so that scaler fitting can
// only ever see training data.
struct TrainSet {
  std::vector<CleanSample> samples;
};
struct TestSet {
  std::vector<CleanSample> samples;
};

inline MaskedMatrix magnitude(const RawCsiSample& s) {
  MaskedMatrix m{Matrix(s.rows(), s.cols()), s.present};
  for (std::size_t i = 0; i < s.data.size(); ++i) m.values.data[i] = std::abs(s.data[i]);
  return m;
}

// Fills absent entries. Within a slot, an absent (subcarrier, tx, rx) entry
// takes the mean of the present tx streams at the same (subcarrier, rx).
// Entries still unfilled (slots without any packet) are linearly interpolated
// along time between the nearest filled slots of the same row; leading and
// trailing gaps copy the nearest filled value.
inline Matrix mean_impute(const MaskedMatrix& in) {
  const std::size_t rows = in.values.rows, cols = in.values.cols;
  if (rows != kWaveforms) throw ShapeError("mean_impute expects 270 rows, got " + in.values.shape_str());
  Matrix out = in.values;
  std::vector<std::uint8_t> filled = in.present;

  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t sc = 0; sc < kSubcarriers; ++sc)
      for (std::size_t rx = 0; rx < kMaxRx; ++rx) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t tx = 0; tx < kMaxTx; ++tx) {
          const std::size_t r = waveform_row(sc, tx, rx);
          if (in.is_present(r, c)) {
            sum += in.values(r, c);
            ++n;
          }
        }
        if (n == 0 || n == static_cast<int>(kMaxTx)) continue;
        const double mean = sum / n;
        for (std::size_t tx = 0; tx < kMaxTx; ++tx) {
          const std::size_t r = waveform_row(sc, tx, rx);
          if (!in.is_present(r, c)) {
            out(r, c) = mean;
            filled[r * cols + c] = 1;
          }
        }
      }

  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* f = filled.data() + r * cols;
    std::size_t first = cols;
    for (std::size_t c = 0; c < cols; ++c)
      if (f[c]) {
        first = c;
        break;
      }
    if (first == cols) throw DataError("imputation failed: waveform " + std::to_string(r) + " has no samples");
    for (std::size_t c = 0; c < first; ++c) out(r, c) = out(r, first);
    std::size_t last = first;
    for (std::size_t c = first + 1; c < cols; ++c) {
      if (!f[c]) continue;
      if (c > last + 1) {
        const double y0 = out(r, last), y1 = out(r, c);
        const double span = static_cast<double>(c - last);
        for (std::size_t g = last + 1; g < c; ++g)
          out(r, g) = y0 + (y1 - y0) * static_cast<double>(g - last) / span;
      }
      last = c;
    }
    for (std::size_t c = last + 1; c < cols; ++c) out(r, c) = out(r, last);
  }
  return out;
}

// Unit-sum Hanning window, w[i] = 0.5 (1 - cos(2 pi i / (n - 1))).
inline std::vector<double> hann_coefficients(std::size_t n) {
  if (n == 0 || n % 2 == 0) throw ParameterError("Hanning window length must be odd and >= 1");
  if (n == 1) return {1.0};
  std::vector<double> w(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
    sum += w[i];
  }
  for (auto& x : w) x /= sum;
  return w;
}

namespace detail {

// Mirror index into [0, n) without repeating the edge sample.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * static_cast<std::ptrdiff_t>(n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

// Smoothed value of `row` at position `c`.
inline double smooth_at(std::span<const double> row, std::span<const double> w, std::size_t c) {
  const std::size_t n = row.size();
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(w.size() / 2);
  const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(c) - half;
  double acc = 0.0;
  if (lo >= 0 && lo + static_cast<std::ptrdiff_t>(w.size()) <= static_cast<std::ptrdiff_t>(n)) {
    const double* x = row.data() + lo;
    for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[j];
  } else {
    for (std::size_t j = 0; j < w.size(); ++j)
      acc += w[j] * row[reflect_index(lo + static_cast<std::ptrdiff_t>(j), n)];
  }
  return acc;
}

}  // namespace detail

// Convolves every row (time axis) with the unit-sum Hanning window, reflect
// padding at both ends.
inline Matrix denoise(const Matrix& mag, std::size_t n_w = kDefaultWindow) {
  const auto w = hann_coefficients(n_w);
  if (mag.cols == 0) throw ParameterError("denoise needs at least one column");
  Matrix out(mag.rows, mag.cols);
  for (std::size_t r = 0; r < mag.rows; ++r) {
    const auto row = mag.row(r);
    for (std::size_t c = 0; c < mag.cols; ++c) out(r, c) = detail::smooth_at(row, w, c);
  }
  return out;
}

// Keeps columns 0, factor, 2 factor, ...
inline Matrix resample(const Matrix& mag, std::size_t factor = kDefaultDecimation) {
  if (factor == 0 || mag.cols % factor != 0)
    throw ParameterError("column count " + std::to_string(mag.cols) + " not divisible by " +
                         std::to_string(factor));
  Matrix out(mag.rows, mag.cols / factor);
  for (std::size_t r = 0; r < mag.rows; ++r)
    for (std::size_t j = 0; j < out.cols; ++j) out(r, j) = mag(r, j * factor);
  return out;
}

// denoise followed by resample, evaluating the window only at kept columns.
inline Matrix denoise_resample(const Matrix& mag, std::size_t n_w, std::size_t factor) {
  const auto w = hann_coefficients(n_w);
  if (factor == 0 || mag.cols == 0 || mag.cols % factor != 0)
    throw ParameterError("column count " + std::to_string(mag.cols) + " not divisible by " +
                         std::to_string(factor));
  Matrix out(mag.rows, mag.cols / factor);
  for (std::size_t r = 0; r < mag.rows; ++r) {
    const auto row = mag.row(r);
    for (std::size_t j = 0; j < out.cols; ++j) out(r, j) = detail::smooth_at(row, w, j * factor);
  }
  return out;
}

// Global scalar statistics. `count` lets partial statistics merge exactly.
struct ScalerStats {
  double mean = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  double count = 0.0;

  static ScalerStats of(std::span<const double> xs) {
    ScalerStats s;
    double sum = 0.0;
    for (double x : xs) {
      sum += x;
      s.min = std::min(s.min, x);
      s.max = std::max(s.max, x);
    }
    s.count = static_cast<double>(xs.size());
    s.mean = xs.empty() ? 0.0 : sum / s.count;
    return s;
  }

  ScalerStats merged(const ScalerStats& o) const {
    if (count == 0) return o;
    if (o.count == 0) return *this;
    ScalerStats s;
    s.count = count + o.count;
    s.mean = (mean * count + o.mean * o.count) / s.count;
    s.min = std::min(min, o.min);
    s.max = std::max(max, o.max);
    return s;
  }

  // Equality on the persisted fields only.
  friend bool operator==(const ScalerStats& a, const ScalerStats& b) {
    return a.mean == b.mean && a.min == b.min && a.max == b.max;
  }
};

inline ScalerStats fit_scaler(const TrainSet& train) {
  if (train.samples.empty()) throw ParameterError("cannot fit scaler on an empty training set");
  ScalerStats s;
  for (const auto& x : train.samples) s = s.merged(ScalerStats::of(x.data.data));
  if (!(s.max > s.min)) throw DataError("degenerate training data: max equals min");
  return s;
}

// x' = (x - mean) / (max - min). Not clamped.
inline CleanSample apply_scaler(const ScalerStats& stats, CleanSample s) {
  const double inv = 1.0 / (stats.max - stats.min);
  for (auto& x : s.data.data) x = (x - stats.mean) * inv;
  return s;
}

struct PreprocessOptions {
  std::size_t window = kDefaultWindow;
  std::size_t decimation = kDefaultDecimation;
};

inline CleanSample preprocess_pipeline(const RawCsiSample& sample,
                                       const std::optional<ScalerStats>& stats = std::nullopt,
                                       const PreprocessOptions& opt = {}) {
  const Matrix filled = mean_impute(magnitude(sample));
  CleanSample out{denoise_resample(filled, opt.window, opt.decimation), std::nullopt};
  if (stats) out = apply_scaler(*stats, std::move(out));
  return out;
}

// Top `rows` rows and the centered `cols` columns, used to shrink clean
// samples to a smaller network input.
inline Matrix crop(const Matrix& m, std::size_t rows, std::size_t cols) {
  if (rows > m.rows || cols > m.cols || rows == 0 || cols == 0)
    throw ShapeError("cannot crop " + m.shape_str() + " to " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  Matrix out(rows, cols);
  const std::size_t c0 = (m.cols - cols) / 2;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = m(r, c0 + c);
  return out;
}

// Text record: mean, min, max, one per line.
inline void write_scaler(const std::string& path, const ScalerStats& s) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write scaler stats to " + path);
  f << std::setprecision(17) << s.mean << '\n' << s.min << '\n' << s.max << '\n';
}

inline ScalerStats read_scaler(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read scaler stats from " + path);
  ScalerStats s;
  if (!(f >> s.mean >> s.min >> s.max)) throw FormatError("malformed scaler stats file " + path);
  if (!(s.min <= s.mean && s.mean <= s.max && s.max > s.min))
    throw DataError("scaler stats violate min <= mean <= max, max > min: " + path);
  s.count = 1.0;
  return s;
}

}  // namespace csigait
