#pragma once

// Synthetic CSI from a static + dynamic multipath model. Dynamic paths carry
// the walking-geometry Doppler curve of a subject passing a TX/RX pair; limb
// paths add a sinusoidal micro-Doppler deviation on top of it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "csigait/csi_log.hpp"
#include "csigait/error.hpp"
#include "csigait/seed.hpp"

namespace csigait {

inline constexpr double kSpeedOfLight = 299792458.0;

struct WalkScenario {
  double a_m = 3.0;        // start distance from the TX/RX baseline
  double b_m = 2.0;        // TX-RX separation
  double v_mps = 1.0;      // walking speed
  double lambda_m = 0.06;  // carrier wavelength

  void validate() const {
    if (!(a_m > 0) || !(b_m > 0) || !(v_mps > 0) || !(lambda_m > 0))
      throw ConfigError("walk scenario requires a, b, v, lambda > 0");
  }
};

// Distance from the walker to the TX/RX midpoint plane geometry:
// sqrt(b^2/4 + (a - v t)^2).
inline double path_distance(const WalkScenario& s, double t) {
  const double x = s.a_m - s.v_mps * t;
  return std::sqrt(s.b_m * s.b_m / 4.0 + x * x);
}

// Doppler shift in Hz: ((a - v t)(-v) / sqrt(b^2/4 + (a - v t)^2)) / lambda.
inline double doppler_shift(const WalkScenario& s, double t) {
  const double x = s.a_m - s.v_mps * t;
  return (x * -s.v_mps) / std::sqrt(s.b_m * s.b_m / 4.0 + x * x) / s.lambda_m;
}

struct StaticPath {
  double amplitude = 1.0;
  double delay_s = 0.0;
};

struct DynamicPath {
  WalkScenario scenario;
  double amplitude = 0.3;   // constant attenuation
  double acs = 1.0;         // absorption coefficient, (0, 1]
  double micro_amp_hz = 0;  // 0 for the torso
  double micro_rate_hz = 0;

  // Instantaneous frequency of this path at time t.
  double frequency(double t) const {
    double f = doppler_shift(scenario, t);
    if (micro_amp_hz != 0)
      f += micro_amp_hz * std::sin(2.0 * std::numbers::pi * micro_rate_hz * t);
    return f;
  }
};

struct SynthScene {
  std::vector<StaticPath> statics;
  std::vector<DynamicPath> dynamics;
  double carrier_hz = kSpeedOfLight / 0.06;
  double subcarrier_spacing_hz = 1.25e6;
  double noise_std = 0.0;
  // Std of the per-antenna-pair phase offset applied to the dynamic term.
  double pair_phase_std = 0.2;
  int label = 0;

  void validate() const {
    if (statics.empty()) throw ConfigError("scene needs at least one static path");
    if (!(subcarrier_spacing_hz > 0)) throw ConfigError("subcarrier spacing must be positive");
    if (!(noise_std >= 0)) throw ConfigError("noise_std must be >= 0");
    if (!(pair_phase_std >= 0)) throw ConfigError("pair_phase_std must be >= 0");
    for (const auto& p : statics)
      if (!(p.amplitude >= 0) || !(p.delay_s >= 0))
        throw ConfigError("static path needs amplitude >= 0 and delay >= 0");
    for (const auto& d : dynamics) {
      d.scenario.validate();
      if (!(d.amplitude >= 0)) throw ConfigError("dynamic path amplitude must be >= 0");
      if (!(d.acs > 0 && d.acs <= 1)) throw ConfigError("dynamic path acs must be in (0, 1]");
      if (!(d.micro_amp_hz >= 0)) throw ConfigError("micro_amp_hz must be >= 0");
    }
  }

  double subcarrier_frequency(std::size_t k) const {
    return carrier_hz +
           (static_cast<double>(k) - (kSubcarriers - 1) / 2.0) * subcarrier_spacing_hz;
  }
};

// Cumulative trapezoid of each dynamic path's frequency on the slot grid.
// Returns phases[m * n + i] in cycles.
inline std::vector<double> doppler_phase(const SynthScene& scene, std::size_t rate_hz,
                                          std::size_t n) {
  const double dt = 1.0 / static_cast<double>(rate_hz);
  std::vector<double> phase(scene.dynamics.size() * n, 0.0);
  for (std::size_t m = 0; m < scene.dynamics.size(); ++m) {
    const auto& path = scene.dynamics[m];
    double prev = path.frequency(0.0);
    double acc = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double cur = path.frequency(static_cast<double>(i) * dt);
      acc += 0.5 * (prev + cur) * dt;
      phase[m * n + i] = acc;
      prev = cur;
    }
  }
  return phase;
}

// Renders H(f_k; t_i) = sum_static a_n e^{-j2 pi f_k tau_n}
//                       + sum_dynamic a_m xi e^{-j2 pi Phi_m(t_i)} + noise
// on all 270 waveforms. The nine antenna pairs of a subcarrier share the model
// and differ by a random phase rotation of the dynamic term.
inline RawCsiSample synth_csi(const SynthScene& scene, std::size_t rate_hz, std::size_t duration_s,
                              std::uint64_t seed) {
  scene.validate();
  if (rate_hz * duration_s < 2) throw ConfigError("need at least two time slots");
  const std::size_t n = rate_hz * duration_s;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::complex<double>> pair_rot(kPairs);
  for (auto& r : pair_rot) r = std::polar(1.0, scene.pair_phase_std * gauss(rng));

  std::vector<std::complex<double>> static_term(kSubcarriers);
  for (std::size_t k = 0; k < kSubcarriers; ++k) {
    const double f = scene.subcarrier_frequency(k);
    std::complex<double> acc{0.0, 0.0};
    for (const auto& p : scene.statics)
      acc += std::polar(p.amplitude, -two_pi * std::fmod(f * p.delay_s, 1.0));
    static_term[k] = acc;
  }

  const auto phase = doppler_phase(scene, rate_hz, n);
  std::vector<std::complex<double>> dyn(n, {0.0, 0.0});
  for (std::size_t m = 0; m < scene.dynamics.size(); ++m) {
    const double amp = scene.dynamics[m].amplitude * scene.dynamics[m].acs;
    for (std::size_t i = 0; i < n; ++i) dyn[i] += std::polar(amp, -two_pi * phase[m * n + i]);
  }

  RawCsiSample s(rate_hz, duration_s);
  const double sigma = scene.noise_std / std::numbers::sqrt2;
  for (std::size_t k = 0; k < kSubcarriers; ++k)
    for (std::size_t p = 0; p < kPairs; ++p) {
      const std::size_t row = k * kPairs + p;
      for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> h = static_term[k] + dyn[i] * pair_rot[p];
        if (sigma > 0) h += std::complex<double>(sigma * gauss(rng), sigma * gauss(rng));
        s(row, i) = h;
      }
    }
  return s;
}

// Marks each tx stream absent per slot with probability p_drop, redrawing a
// slot whenever all three streams would be dropped.
inline RawCsiSample inject_missing(RawCsiSample sample, double p_drop, std::uint64_t seed) {
  if (!(p_drop >= 0 && p_drop < 1)) throw ParameterError("p_drop must be in [0, 1)");
  if (p_drop == 0) return sample;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(p_drop);
  for (std::size_t c = 0; c < sample.cols(); ++c) {
    std::array<bool, kMaxTx> gone{};
    do {
      for (auto& g : gone) g = drop(rng);
    } while (gone[0] && gone[1] && gone[2]);
    for (std::size_t tx = 0; tx < kMaxTx; ++tx) {
      if (!gone[tx]) continue;
      for (std::size_t sc = 0; sc < kSubcarriers; ++sc)
        for (std::size_t rx = 0; rx < kMaxRx; ++rx) sample.set_present(waveform_row(sc, tx, rx), c, false);
    }
  }
  return sample;
}

// Ranges from which per-subject parameters are drawn. Each range is divided
// into one bin per subject; a subject sits near the center of its bin and its
// samples jitter within it, so subjects occupy disjoint intervals.
struct SubjectRanges {
  double v_lo = 0.6, v_hi = 1.6;
  double a_lo = 2.0, a_hi = 4.0;
  double torso_amp_lo = 0.2, torso_amp_hi = 0.5;
  double limb_amp_lo = 0.05, limb_amp_hi = 0.15;
  double micro_rate_lo = 0.8, micro_rate_hi = 2.0;
  double acs_lo = 0.5, acs_hi = 1.0;
  // Subject offset from bin center and per-sample jitter, both in bin widths.
  double subject_spread = 0.25;
  double sample_jitter = 0.15;
};

struct SampleSpec {
  SynthScene scene;
  std::uint64_t seed = 0;
  int label = 0;
  std::size_t index_in_subject = 0;
};

// Default scene: three static reflectors, a torso path and two limb paths.
inline SynthScene default_scene() {
  SynthScene s;
  s.statics = {{1.0, 10e-9}, {0.5, 23e-9}, {0.3, 37e-9}};
  DynamicPath torso;
  torso.amplitude = 0.35;
  DynamicPath limb_a = torso, limb_b = torso;
  limb_a.amplitude = 0.1;
  limb_a.micro_amp_hz = 15.0;
  limb_a.micro_rate_hz = 1.0;
  limb_b.amplitude = 0.08;
  limb_b.micro_amp_hz = 10.0;
  limb_b.micro_rate_hz = 2.0;
  s.dynamics = {torso, limb_a, limb_b};
  s.noise_std = 0.05;
  return s;
}

// Scenes and seeds for a labeled dataset, without rendering samples.
// base.dynamics[0] is treated as the torso, remaining dynamics as limbs.
inline std::vector<SampleSpec> plan_dataset(std::size_t subjects, std::size_t samples_per_subject,
                                            const SynthScene& base, std::uint64_t seed,
                                            const SubjectRanges& ranges = {}) {
  if (subjects < 2) throw ParameterError("synth_dataset needs at least two subjects");
  base.validate();
  if (base.dynamics.empty()) throw ConfigError("dataset template needs a torso path");

  std::mt19937_64 rng(derive_seed(seed, 0x5EED));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Independent bin permutations so parameters are not all ordered alike.
  constexpr int kParams = 6;
  std::vector<std::vector<std::size_t>> bins(kParams, std::vector<std::size_t>(subjects));
  for (auto& b : bins) {
    for (std::size_t i = 0; i < subjects; ++i) b[i] = i;
    std::shuffle(b.begin(), b.end(), rng);
  }
  const double n = static_cast<double>(subjects);
  auto bin_center = [n](double lo, double hi, std::size_t bin) {
    return lo + (static_cast<double>(bin) + 0.5) * (hi - lo) / n;
  };
  struct Profile {
    double v, a, torso, limb, rate, acs;
  };
  const std::array<std::pair<double, double>, kParams> rg{{
      {ranges.v_lo, ranges.v_hi},
      {ranges.a_lo, ranges.a_hi},
      {ranges.torso_amp_lo, ranges.torso_amp_hi},
      {ranges.limb_amp_lo, ranges.limb_amp_hi},
      {ranges.micro_rate_lo, ranges.micro_rate_hi},
      {ranges.acs_lo, ranges.acs_hi},
  }};
  std::vector<std::array<double, kParams>> profiles(subjects);
  for (std::size_t s = 0; s < subjects; ++s)
    for (int p = 0; p < kParams; ++p) {
      const double w = (rg[p].second - rg[p].first) / n;
      profiles[s][p] =
          bin_center(rg[p].first, rg[p].second, bins[p][s]) + ranges.subject_spread * w * unit(rng);
    }

  std::vector<SampleSpec> plan;
  plan.reserve(subjects * samples_per_subject);
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t j = 0; j < samples_per_subject; ++j) {
      std::mt19937_64 jr(derive_seed(seed, s + 1, j + 1));
      std::array<double, kParams> v{};
      for (int p = 0; p < kParams; ++p) {
        const double w = (rg[p].second - rg[p].first) / n;
        v[p] = profiles[s][p] + ranges.sample_jitter * w * unit(jr);
      }
      SampleSpec spec;
      spec.scene = base;
      spec.scene.label = static_cast<int>(s);
      const double base_limb = std::max(1e-12, base.dynamics.size() > 1 ? base.dynamics[1].amplitude : 1.0);
      const double base_rate = base.dynamics.size() > 1 && base.dynamics[1].micro_rate_hz > 0
                                   ? base.dynamics[1].micro_rate_hz
                                   : 1.0;
      for (std::size_t m = 0; m < spec.scene.dynamics.size(); ++m) {
        auto& d = spec.scene.dynamics[m];
        d.scenario.v_mps = v[0];
        d.scenario.a_m = v[1];
        d.acs = std::clamp(v[5], 1e-6, 1.0);
        if (m == 0) {
          d.amplitude = v[2];
        } else {
          // Limbs keep their relative amplitude and rate ratios from the template.
          d.amplitude = v[3] * d.amplitude / base_limb;
          d.micro_rate_hz = v[4] * d.micro_rate_hz / base_rate;
        }
      }
      spec.seed = derive_seed(seed, 0xC51 + s, j);
      spec.label = static_cast<int>(s);
      spec.index_in_subject = j;
      plan.push_back(std::move(spec));
    }
  return plan;
}

struct LabeledRaw {
  RawCsiSample sample;
  int label = 0;
};

// Renders every planned sample. A 270x8000 sample is ~36 MB; large datasets
// should iterate plan_dataset and render one sample at a time.
inline std::vector<LabeledRaw> synth_dataset(std::size_t subjects, std::size_t samples_per_subject,
                                             const SynthScene& base, std::uint64_t seed,
                                             std::size_t rate_hz = 2000, std::size_t duration_s = 4,
                                             const SubjectRanges& ranges = {}) {
  std::vector<LabeledRaw> out;
  for (const auto& spec : plan_dataset(subjects, samples_per_subject, base, seed, ranges))
    out.push_back({synth_csi(spec.scene, rate_hz, duration_s, spec.seed), spec.label});
  return out;
}

}  // namespace csigait
