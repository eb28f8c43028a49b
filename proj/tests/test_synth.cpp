#include <gtest/gtest.h>

#include <numbers>

#include "csigait/preprocess.hpp"
#include "csigait/synth.hpp"
#include "test_util.hpp"

namespace csigait {
namespace {

double fd_velocity(const WalkScenario& s, double t, double h = 1e-6) {
  return (path_distance(s, t + h) - path_distance(s, t - h)) / (2 * h);
}

TEST(PathDistance, ClosestApproachAndStart) {
  WalkScenario s;
  EXPECT_DOUBLE_EQ(path_distance(s, s.a_m / s.v_mps), s.b_m / 2);
  EXPECT_DOUBLE_EQ(path_distance(s, 0.0), std::sqrt(10.0));
}

TEST(PathDistance, EvenAboutClosestApproach) {
  WalkScenario s{2.5, 1.5, 0.8, 0.06};
  const double tc = s.a_m / s.v_mps;
  for (double d : {0.1, 0.7, 2.0, 5.5}) EXPECT_NEAR(path_distance(s, tc - d), path_distance(s, tc + d), 1e-12);
}

TEST(DopplerShift, ZeroAtClosestApproach) {
  WalkScenario s;
  EXPECT_EQ(doppler_shift(s, s.a_m / s.v_mps), 0.0);
}

TEST(DopplerShift, Asymptotes) {
  WalkScenario s;
  const double vmax = s.v_mps / s.lambda_m;
  EXPECT_NEAR(doppler_shift(s, 1e6), vmax, 1e-6);
  EXPECT_NEAR(doppler_shift(s, -1e6), -vmax, 1e-6);
}

TEST(DopplerShift, MatchesFiniteDifferenceOfDistance) {
  WalkScenario s;
  const double fd = fd_velocity(s, 0.0) / s.lambda_m;
  EXPECT_LT(test::rel_error(doppler_shift(s, 0.0), fd), 1e-6);
}

TEST(DopplerShift, FiniteDifferenceOverGrid) {
  for (double a = 1; a <= 5; a += 1)
    for (double b = 0.5; b <= 4; b += 0.875)
      for (double v = 0.5; v <= 2; v += 0.5)
        for (double t = 0; t < 8; t += 0.37) {
          WalkScenario s{a, b, v, 0.06};
          const double d = doppler_shift(s, t);
          const double fd = fd_velocity(s, t) / s.lambda_m;
          EXPECT_LT(std::abs(d - fd) / std::max(1.0, std::abs(d)), 1e-6) << a << ' ' << b << ' ' << v << ' ' << t;
        }
}

TEST(DopplerShift, SingleSignChange) {
  WalkScenario s{2.0, 1.0, 1.2, 0.06};
  int changes = 0;
  double prev = doppler_shift(s, 0.0);
  double where = 0;
  for (int i = 1; i <= 10000; ++i) {
    const double t = i * 1e-3;
    const double cur = doppler_shift(s, t);
    if ((prev < 0) != (cur < 0) && cur != 0) {
      ++changes;
      where = t;
    }
    prev = cur;
  }
  EXPECT_EQ(changes, 1);
  EXPECT_NEAR(where, s.a_m / s.v_mps, 1e-3);
}

TEST(WalkScenario, RejectsNonPositiveFields) {
  EXPECT_THROW((WalkScenario{0, 1, 1, 1}.validate()), ConfigError);
  EXPECT_THROW((WalkScenario{1, 1, -1, 1}.validate()), ConfigError);
  EXPECT_NO_THROW(WalkScenario{}.validate());
}

SynthScene torso_only(double static_amp) {
  SynthScene s;
  s.statics = {{static_amp, 12e-9}};
  s.dynamics = {DynamicPath{}};
  s.noise_std = 0;
  return s;
}

TEST(SynthCsi, StaticSceneIsConstant) {
  SynthScene s = default_scene();
  s.dynamics.clear();
  s.noise_std = 0;
  const auto x = synth_csi(s, 200, 1, 5);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 1; c < x.cols(); ++c) ASSERT_EQ(x(r, c), x(r, 0));
}

TEST(SynthCsi, PhaseDifferenceTracksDoppler) {
  const auto scene = torso_only(0.0);
  const std::size_t rate = 2000;
  const auto x = synth_csi(scene, rate, 4, 11);
  const auto& sc = scene.dynamics[0].scenario;
  double worst = 0;
  for (std::size_t row : {0u, 100u, 269u})
    for (std::size_t i = 0; i + 1 < x.cols(); ++i) {
      const double f = std::arg(x(row, i + 1) * std::conj(x(row, i))) * rate / (2 * std::numbers::pi);
      const double t_mid = (static_cast<double>(i) + 0.5) / rate;
      // e^{-j 2 pi Phi} rotates clockwise, so the measured frequency is -f_D.
      worst = std::max(worst, std::abs(f + doppler_shift(sc, t_mid)));
    }
  EXPECT_LT(worst, 0.5);
}

TEST(SynthCsi, DeterministicPerSeed) {
  const auto s = default_scene();
  const auto a = synth_csi(s, 100, 2, 42);
  const auto b = synth_csi(s, 100, 2, 42);
  const auto c = synth_csi(s, 100, 2, 43);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
}

TEST(SynthCsi, EnergyBound) {
  auto s = default_scene();
  s.noise_std = 0;
  double bound = 0;
  for (const auto& p : s.statics) bound += p.amplitude;
  for (const auto& p : s.dynamics) bound += p.amplitude * p.acs;
  const auto x = synth_csi(s, 500, 4, 3);
  for (const auto& h : x.data) ASSERT_LE(std::abs(h), bound + 1e-12);
}

TEST(SynthCsi, ShapeAndFullPresence) {
  const auto x = synth_csi(default_scene(), 2000, 4, 1);
  EXPECT_EQ(x.rows(), 270u);
  EXPECT_EQ(x.cols(), 8000u);
  EXPECT_TRUE(std::all_of(x.present.begin(), x.present.end(), [](auto v) { return v == 1; }));
}

TEST(SynthCsi, PairsShareModelUpToRotation) {
  auto s = torso_only(0.0);
  const auto x = synth_csi(s, 100, 1, 9);
  // Dynamic-only scene: each pair is the same signal times a fixed unit rotation.
  for (std::size_t p = 1; p < kPairs; ++p) {
    const auto rot = x(p, 0) / x(0, 0);
    EXPECT_NEAR(std::abs(rot), 1.0, 1e-12);
    for (std::size_t c = 0; c < x.cols(); c += 7) EXPECT_LT(std::abs(x(p, c) - rot * x(0, c)), 1e-12);
  }
}

TEST(SynthCsi, InvalidSceneIsConfigError) {
  SynthScene s;
  EXPECT_THROW(synth_csi(s, 100, 1, 0), ConfigError);  // no static path
  s = default_scene();
  s.dynamics[0].acs = 0;
  EXPECT_THROW(synth_csi(s, 100, 1, 0), ConfigError);
  s = default_scene();
  s.noise_std = -1;
  EXPECT_THROW(synth_csi(s, 100, 1, 0), ConfigError);
  EXPECT_THROW(synth_csi(default_scene(), 1, 1, 0), ConfigError);
}

TEST(InjectMissing, ZeroProbabilityLeavesMask) {
  const auto x = synth_csi(default_scene(), 100, 1, 1);
  EXPECT_EQ(inject_missing(x, 0.0, 3).present, x.present);
  EXPECT_THROW(inject_missing(x, 1.0, 3), ParameterError);
  EXPECT_THROW(inject_missing(x, -0.1, 3), ParameterError);
}

TEST(InjectMissing, DeterministicAndNeverAllStreams) {
  const auto x = synth_csi(default_scene(), 500, 1, 1);
  const auto a = inject_missing(x, 0.5, 7);
  EXPECT_EQ(a.present, inject_missing(x, 0.5, 7).present);
  for (std::size_t c = 0; c < a.cols(); ++c) {
    bool any = false;
    for (std::size_t tx = 0; tx < 3; ++tx) any |= a.is_present(waveform_row(0, tx, 0), c);
    ASSERT_TRUE(any);
  }
}

TEST(InjectMissing, MonteCarloDropRate) {
  // Per-stream rate after rejecting all-three drops: (p - p^3) / (1 - p^3).
  auto scene = default_scene();
  scene.dynamics.clear();
  scene.noise_std = 0;
  const auto x = synth_csi(scene, 2000, 4, 1);
  for (double p : {0.1, 0.5}) {
    std::size_t slots = 0, dropped = 0;
    for (std::uint64_t k = 0; slots < 100000; ++k) {
      const auto m = inject_missing(x, p, 100 + k);
      for (std::size_t c = 0; c < m.cols(); ++c, ++slots)
        for (std::size_t tx = 0; tx < 3; ++tx) dropped += !m.is_present(waveform_row(0, tx, 0), c);
    }
    const double rate = static_cast<double>(dropped) / (3.0 * static_cast<double>(slots));
    EXPECT_NEAR(rate, (p - p * p * p) / (1 - p * p * p), 0.01) << "p=" << p;
  }
}

TEST(PlanDataset, LabelsAndDeterminism) {
  const auto plan = plan_dataset(2, 1, default_scene(), 5);
  ASSERT_EQ(plan.size(), 2u);
  EXPECT_EQ(plan[0].label, 0);
  EXPECT_EQ(plan[1].label, 1);
  const auto again = plan_dataset(2, 1, default_scene(), 5);
  EXPECT_EQ(again[1].seed, plan[1].seed);
  EXPECT_EQ(again[1].scene.dynamics[0].scenario.v_mps, plan[1].scene.dynamics[0].scenario.v_mps);
  EXPECT_THROW(plan_dataset(1, 3, default_scene(), 5), ParameterError);
}

TEST(PlanDataset, SubjectParameterRangesAreDisjoint) {
  const std::size_t subjects = 6;
  const auto plan = plan_dataset(subjects, 20, default_scene(), 9);
  std::vector<double> lo(subjects, 1e9), hi(subjects, -1e9);
  for (const auto& s : plan) {
    const double v = s.scene.dynamics[0].scenario.v_mps;
    lo[s.label] = std::min(lo[s.label], v);
    hi[s.label] = std::max(hi[s.label], v);
  }
  for (std::size_t i = 0; i < subjects; ++i)
    for (std::size_t j = i + 1; j < subjects; ++j) EXPECT_TRUE(hi[i] < lo[j] || hi[j] < lo[i]) << i << ' ' << j;
}

TEST(SynthDataset, SameSeedSameData) {
  const auto a = synth_dataset(2, 1, default_scene(), 3, 100, 1);
  const auto b = synth_dataset(2, 1, default_scene(), 3, 100, 1);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].label, 0);
  EXPECT_EQ(a[1].label, 1);
  EXPECT_EQ(a[1].sample.data, b[1].sample.data);
}

TEST(SynthDataset, NearestCentroidBeatsChance) {
  const std::size_t subjects = 5, per = 40;
  const auto plan = plan_dataset(subjects, per, default_scene(), 21);
  std::vector<std::vector<double>> feats;
  std::vector<int> labels;
  for (const auto& spec : plan) {
    const auto raw = synth_csi(spec.scene, 2000, 4, spec.seed);
    feats.push_back(denoise_resample(mean_impute(magnitude(raw)), kDefaultWindow, kDefaultDecimation).data);
    labels.push_back(spec.label);
  }
  // Centroids from even-indexed samples, scored on odd-indexed ones.
  const std::size_t dim = feats[0].size();
  std::vector<std::vector<double>> centroid(subjects, std::vector<double>(dim, 0.0));
  std::vector<double> n(subjects, 0.0);
  for (std::size_t i = 0; i < feats.size(); i += 2) {
    for (std::size_t d = 0; d < dim; ++d) centroid[labels[i]][d] += feats[i][d];
    n[labels[i]] += 1;
  }
  for (std::size_t k = 0; k < subjects; ++k)
    for (auto& v : centroid[k]) v /= n[k];
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 1; i < feats.size(); i += 2, ++total) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < subjects; ++k) {
      double d = 0;
      for (std::size_t j = 0; j < dim; ++j) d += (feats[i][j] - centroid[k][j]) * (feats[i][j] - centroid[k][j]);
      if (d < best_d) best_d = d, best = k;
    }
    hits += static_cast<int>(best) == labels[i];
  }
  EXPECT_GT(static_cast<double>(hits) / static_cast<double>(total), 0.2);
}

}  // namespace
}  // namespace csigait
