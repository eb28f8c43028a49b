#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

#include "csigait/preprocess.hpp"
#include "csigait/synth.hpp"
#include "test_util.hpp"

namespace csigait {
namespace {

// Reference smoothing: build the reflect-padded row by walking outward from
// each edge and bouncing off the ends, then slide the window.
std::vector<double> naive_smooth(const std::vector<double>& row, const std::vector<double>& w) {
  const std::size_t half = w.size() / 2, n = row.size();
  auto bounce = [&](std::ptrdiff_t start, int dir) {
    std::vector<double> out;
    std::ptrdiff_t i = start;
    for (std::size_t k = 0; k < half; ++k) {
      if (n > 1) {
        if (i + dir < 0 || i + dir >= static_cast<std::ptrdiff_t>(n)) dir = -dir;
        i += dir;
      }
      out.push_back(row[static_cast<std::size_t>(i)]);
    }
    return out;
  };
  auto left = bounce(0, -1);
  std::vector<double> padded(left.rbegin(), left.rend());
  padded.insert(padded.end(), row.begin(), row.end());
  const auto right = bounce(static_cast<std::ptrdiff_t>(n) - 1, 1);
  padded.insert(padded.end(), right.begin(), right.end());
  std::vector<double> out(n, 0.0);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t j = 0; j < w.size(); ++j) out[c] += w[j] * padded[c + j];
  return out;
}

RawCsiSample random_raw(std::size_t cols, std::uint64_t seed) {
  RawCsiSample s(cols, 1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 3);
  for (auto& x : s.data) x = {g(rng), g(rng)};
  return s;
}

TEST(Magnitude, Modulus) {
  RawCsiSample s(2, 1);
  s(0, 0) = {3, 4};
  const auto m = magnitude(s);
  EXPECT_DOUBLE_EQ(m.values(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(m.values(5, 1), 0.0);
}

TEST(Magnitude, GlobalPhaseInvariant) {
  auto s = random_raw(50, 1);
  const auto before = magnitude(s);
  for (auto& x : s.data) x *= std::polar(1.0, 1.234);
  const auto after = magnitude(s);
  for (std::size_t i = 0; i < before.values.data.size(); ++i)
    EXPECT_NEAR(before.values.data[i], after.values.data[i], 1e-12);
}

TEST(MeanImpute, FullyPresentUnchanged) {
  const auto m = magnitude(random_raw(40, 2));
  EXPECT_EQ(mean_impute(m), m.values);
}

TEST(MeanImpute, TwoValueMean) {
  RawCsiSample s(3, 1);
  for (auto& x : s.data) x = {1, 0};
  s(waveform_row(4, 0, 2), 1) = {2, 0};
  s(waveform_row(4, 1, 2), 1) = {0, 4};
  for (std::size_t sc = 0; sc < 30; ++sc)
    for (std::size_t rx = 0; rx < 3; ++rx) s.set_present(waveform_row(sc, 2, rx), 1, false);
  const auto out = mean_impute(magnitude(s));
  EXPECT_DOUBLE_EQ(out(waveform_row(4, 2, 2), 1), 3.0);
  EXPECT_DOUBLE_EQ(out(waveform_row(0, 2, 0), 1), 1.0);
}

TEST(MeanImpute, EmptySlotsInterpolateAlongTime) {
  RawCsiSample s(6, 1);
  for (std::size_t r = 0; r < 270; ++r)
    for (std::size_t c = 0; c < 6; ++c) s(r, c) = {static_cast<double>(c == 1 ? 2 : c == 4 ? 8 : 0), 0};
  for (std::size_t r = 0; r < 270; ++r)
    for (std::size_t c : {0, 2, 3, 5}) s.set_present(r, c, false);
  const auto out = mean_impute(magnitude(s));
  EXPECT_DOUBLE_EQ(out(7, 0), 2.0);
  EXPECT_DOUBLE_EQ(out(7, 2), 4.0);
  EXPECT_DOUBLE_EQ(out(7, 3), 6.0);
  EXPECT_DOUBLE_EQ(out(7, 5), 8.0);
}

TEST(MeanImpute, NoSamplesIsError) {
  RawCsiSample s(4, 1);
  std::fill(s.present.begin(), s.present.end(), 0);
  EXPECT_THROW(mean_impute(magnitude(s)), DataError);
}

TEST(MeanImpute, RandomMasksNeverTouchPresentEntries) {
  const auto base = random_raw(64, 3);
  std::mt19937_64 rng(4);
  std::bernoulli_distribution drop(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = base;
    for (std::size_t c = 0; c < s.cols(); ++c)
      for (std::size_t tx = 0; tx < 3; ++tx)
        if (drop(rng))
          for (std::size_t sc = 0; sc < 30; ++sc)
            for (std::size_t rx = 0; rx < 3; ++rx) s.set_present(waveform_row(sc, tx, rx), c, false);
    const auto m = magnitude(s);
    const auto out = mean_impute(m);
    for (std::size_t r = 0; r < 270; ++r)
      for (std::size_t c = 0; c < s.cols(); ++c) {
        ASSERT_TRUE(std::isfinite(out(r, c)));
        if (m.is_present(r, c)) {
          ASSERT_EQ(out(r, c), m.values(r, c));
        }
      }
  }
}

TEST(Hann, SmallCases) {
  EXPECT_EQ(hann_coefficients(1), std::vector<double>{1.0});
  const auto w3 = hann_coefficients(3);
  EXPECT_NEAR(w3[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(w3[1], 1.0);
  EXPECT_NEAR(w3[2], 0.0, 1e-15);
  EXPECT_THROW(hann_coefficients(4), ParameterError);
  EXPECT_THROW(hann_coefficients(0), ParameterError);
}

TEST(Hann, Length91SymmetricUnitSum) {
  const auto w = hann_coefficients(91);
  double sum = 0, raw_sum = 0;
  for (std::size_t i = 0; i < 91; ++i) {
    EXPECT_NEAR(w[i], w[90 - i], 1e-15);
    sum += w[i];
    raw_sum += 0.5 * (1 - std::cos(2 * std::numbers::pi * i / 90.0));
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  for (std::size_t i = 0; i < 91; ++i)
    EXPECT_NEAR(w[i], 0.5 * (1 - std::cos(2 * std::numbers::pi * i / 90.0)) / raw_sum, 1e-15);
}

TEST(Denoise, ConstantRowPreserved) {
  Matrix m(3, 300);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 300; ++c) m(r, c) = 1.7 + r;
  const auto out = denoise(m);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 300; ++c) EXPECT_NEAR(out(r, c), 1.7 + r, 1e-12);
}

TEST(Denoise, AlternatingSuppressed) {
  Matrix m(1, 500);
  for (std::size_t c = 0; c < 500; ++c) m(0, c) = c % 2 ? -1.0 : 1.0;
  const auto out = denoise(m, 91);
  for (double v : out.data) EXPECT_LT(std::abs(v), 0.05);
}

TEST(Denoise, ImpulseGivesWindow) {
  Matrix m(1, 301);
  m(0, 150) = 1.0;
  const auto out = denoise(m, 91);
  const auto w = hann_coefficients(91);
  for (std::size_t j = 0; j < 91; ++j) EXPECT_NEAR(out(0, 150 - 45 + j), w[j], 1e-15);
}

TEST(Denoise, MatchesPaddedConvolution) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 7u, 30u, 46u, 200u}) {
    Matrix m(2, n);
    for (auto& v : m.data) v = g(rng);
    const auto out = denoise(m, 91);
    const auto w = hann_coefficients(91);
    for (std::size_t r = 0; r < 2; ++r) {
      const auto ref = naive_smooth({m.row(r).begin(), m.row(r).end()}, w);
      for (std::size_t c = 0; c < n; ++c) EXPECT_NEAR(out(r, c), ref[c], 1e-12) << "n=" << n;
    }
  }
}

TEST(Resample, DecimationContract) {
  Matrix m(270, 8000);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(i);
  const auto out = resample(m, 16);
  EXPECT_EQ(out.rows, 270u);
  EXPECT_EQ(out.cols, 500u);
  for (std::size_t r = 0; r < 270; r += 37)
    for (std::size_t j = 0; j < 500; ++j) EXPECT_EQ(out(r, j), m(r, 16 * j));
  EXPECT_EQ(resample(m, 1), m);
  EXPECT_THROW(resample(m, 3), ParameterError);
}

TEST(Resample, FusedMatchesTwoStage) {
  Matrix m(4, 800);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (auto& v : m.data) v = g(rng);
  const auto fused = denoise_resample(m, 91, 16);
  const auto staged = resample(denoise(m, 91), 16);
  ASSERT_EQ(fused.cols, staged.cols);
  for (std::size_t i = 0; i < fused.data.size(); ++i) EXPECT_EQ(fused.data[i], staged.data[i]);
}

CleanSample clean_of(std::vector<double> v) {
  CleanSample s{Matrix(1, v.size()), std::nullopt};
  s.data.data = std::move(v);
  return s;
}

TEST(Scaler, SingleSample) {
  TrainSet t{{clean_of({0, 10})}};
  const auto s = fit_scaler(t);
  EXPECT_EQ(s.mean, 5);
  EXPECT_EQ(s.min, 0);
  EXPECT_EQ(s.max, 10);
  EXPECT_THROW(fit_scaler(TrainSet{}), ParameterError);
  EXPECT_THROW(fit_scaler(TrainSet{{clean_of({2, 2})}}), DataError);
}

TEST(Scaler, MergeEqualsUnion) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(3, 2);
  std::vector<double> a(37), b(91);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = g(rng);
  std::vector<double> u = a;
  u.insert(u.end(), b.begin(), b.end());
  const auto merged = fit_scaler(TrainSet{{clean_of(a), clean_of(b)}});
  const auto whole = fit_scaler(TrainSet{{clean_of(u)}});
  EXPECT_NEAR(merged.mean, whole.mean, 1e-12);
  EXPECT_EQ(merged.min, whole.min);
  EXPECT_EQ(merged.max, whole.max);
  const auto swapped = fit_scaler(TrainSet{{clean_of(b), clean_of(a)}});
  EXPECT_NEAR(swapped.mean, merged.mean, 1e-12);
}

TEST(Scaler, TrainingDataLandsInUnitRangeWithZeroMean) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-4, 9);
  TrainSet t;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v(300);
    for (auto& x : v) x = u(rng);
    t.samples.push_back(clean_of(v));
  }
  const auto stats = fit_scaler(t);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& s : t.samples)
    for (double x : apply_scaler(stats, s).data.data) {
      EXPECT_GE(x, -1.0);
      EXPECT_LE(x, 1.0);
      sum += x;
      ++n;
    }
  EXPECT_NEAR(sum / n, 0.0, 1e-9);
  EXPECT_EQ(apply_scaler(stats, clean_of({stats.mean})).data.data[0], 0.0);
  const double top = apply_scaler(stats, clean_of({stats.max})).data.data[0];
  EXPECT_GT(top, 0.0);
  EXPECT_LE(top, 1.0);
}

TEST(Scaler, AffineInInput) {
  ScalerStats st{1.5, -2.0, 6.0, 1};
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<double> x(20);
  for (auto& v : x) v = g(rng);
  const double alpha = 2.5, beta = -0.75;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i] + beta;
  const auto fx = apply_scaler(st, clean_of(x)).data.data;
  const auto fy = apply_scaler(st, clean_of(y)).data.data;
  const double c = fy[0] - alpha * x[0] / 8.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(fy[i], alpha * x[i] / 8.0 + c, 1e-12);
    EXPECT_NEAR(fx[i], (x[i] - 1.5) / 8.0, 1e-15);
  }
}

TEST(Scaler, TextRoundTrip) {
  const auto p = std::filesystem::temp_directory_path() / "csigait_scaler_test.txt";
  const ScalerStats s{0.1234567890123456789, -3.25, 11.0, 42};
  write_scaler(p.string(), s);
  EXPECT_EQ(read_scaler(p.string()), s);
  std::filesystem::remove(p);
}

TEST(Pipeline, ConstantMagnitudeGivesConstantOutput) {
  RawCsiSample s(2000, 4);
  for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = std::polar(2.5, 0.01 * static_cast<double>(i % 97));
  const auto out = preprocess_pipeline(s);
  EXPECT_EQ(out.data.rows, 270u);
  EXPECT_EQ(out.data.cols, 500u);
  for (double v : out.data.data) ASSERT_NEAR(v, 2.5, 1e-12);
}

TEST(Pipeline, StageShapesAndDeterminism) {
  const auto raw = synth_csi(default_scene(), 2000, 4, 3);
  const auto mag = magnitude(raw);
  ASSERT_EQ(mag.values.shape_str(), "270x8000");
  const auto filled = mean_impute(mag);
  ASSERT_EQ(filled.shape_str(), "270x8000");
  const auto smooth = denoise(filled);
  ASSERT_EQ(smooth.shape_str(), "270x8000");
  const auto small = resample(smooth);
  ASSERT_EQ(small.shape_str(), "270x500");
  const auto a = preprocess_pipeline(raw);
  EXPECT_EQ(a.data, small);
  EXPECT_EQ(preprocess_pipeline(raw).data, a.data);
  EXPECT_NE(denoise(smooth), smooth);
}

TEST(Crop, TopRowsCenteredColumns) {
  Matrix m(270, 500);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(i);
  const auto c = crop(m, 64, 125);
  EXPECT_EQ(c.shape_str(), "64x125");
  EXPECT_EQ(c(0, 0), m(0, 187));
  EXPECT_EQ(c(63, 124), m(63, 311));
  EXPECT_THROW(crop(m, 271, 10), ShapeError);
}

}  // namespace
}  // namespace csigait
