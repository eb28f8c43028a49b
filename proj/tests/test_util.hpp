#pragma once

// Shared generators and finite-difference helpers for the test suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "csigait/csi_log.hpp"
#include "csigait/nn/tensor.hpp"

namespace csigait::test {

inline CsiPacket random_packet(std::mt19937_64& rng, std::uint32_t ts, std::uint8_t n_rx = 0, std::uint8_t n_tx = 0) {
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> ant(1, 3);
  CsiPacket p;
  p.timestamp_us = ts;
  p.seq = static_cast<std::uint16_t>(byte(rng) << 8 | byte(rng));
  p.reserved = static_cast<std::uint16_t>(byte(rng));
  p.n_rx = n_rx ? n_rx : static_cast<std::uint8_t>(ant(rng));
  p.n_tx = n_tx ? n_tx : static_cast<std::uint8_t>(ant(rng));
  p.rssi = {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
            static_cast<std::uint8_t>(byte(rng))};
  p.noise_dbm = static_cast<std::int8_t>(byte(rng) - 128);
  p.agc = static_cast<std::uint8_t>(byte(rng));
  p.antenna_sel = static_cast<std::uint8_t>(byte(rng));
  p.rate_code = static_cast<std::uint16_t>(byte(rng) << 8 | byte(rng));
  p.csi.resize(30u * p.n_tx * p.n_rx);
  for (auto& e : p.csi) e = {static_cast<std::int8_t>(byte(rng) - 128), static_cast<std::int8_t>(byte(rng) - 128)};
  return p;
}

inline CsiPacket random_packet(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> ts;
  return random_packet(rng, ts(rng));
}

inline nn::Tensor4 random_tensor(std::mt19937_64& rng, std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                                 double scale = 1.0) {
  nn::Tensor4 t(n, c, h, w);
  std::normal_distribution<double> g(0.0, scale);
  for (auto& v : t.data) v = g(rng);
  return t;
}

// |a - b| / max(|a|, |b|), with absolute error used when both are tiny.
inline double rel_error(double a, double b, double floor = 1e-10) {
  const double d = std::abs(a - b);
  const double s = std::max(std::abs(a), std::abs(b));
  return s < floor ? d : d / s;
}

// Central difference of f at value x (perturbed in place, then restored).
inline double central_difference(double& x, double h, const std::function<double()>& f) {
  const double saved = x;
  x = saved + h;
  const double fp = f();
  x = saved - h;
  const double fm = f();
  x = saved;
  return (fp - fm) / (2 * h);
}

// Central difference that also reports whether both probes stayed in the same
// smooth region as the unperturbed point, according to `region()` evaluated
// after each call of f.
struct Probe {
  double derivative = 0;
  bool smooth = true;
};

template <typename F, typename R>
Probe guarded_difference(double& x, double h, F&& f, R&& region) {
  const double saved = x;
  f();
  const auto r0 = region();
  x = saved + h;
  const double fp = f();
  const auto rp = region();
  x = saved - h;
  const double fm = f();
  const auto rm = region();
  x = saved;
  return {(fp - fm) / (2 * h), rp == r0 && rm == r0};
}

}  // namespace csigait::test
