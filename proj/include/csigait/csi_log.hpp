#pragma once

// Reader/writer for the CSIL v1 packet log and assembly of packet streams
// into fixed-duration CSI samples.
//
// Stream layout:
//   header  "CSIL" 0x01
//   record  length:u16 (big-endian, counts code + payload) code:u8 payload
//   code 0xBB payload (little-endian):
//     timestamp_us:u32 seq:u16 reserved:u16 n_rx:u8 n_tx:u8
//     rssi_a:u8 rssi_b:u8 rssi_c:u8 noise:i8 agc:u8 antenna_sel:u8
//     matrix_len:u16 rate_code:u16
//     matrix: for sc in 0..29, tx in 0..n_tx-1, rx in 0..n_rx-1: re:i8 im:i8
// Records with any other code are skipped.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csigait/error.hpp"

namespace csigait {

inline constexpr std::size_t kSubcarriers = 30;
inline constexpr std::size_t kMaxTx = 3;
inline constexpr std::size_t kMaxRx = 3;
inline constexpr std::size_t kPairs = kMaxTx * kMaxRx;
inline constexpr std::size_t kWaveforms = kSubcarriers * kPairs;  // 270

// Row of a waveform inside a CSI sample: subcarrier-major, then tx, then rx.
constexpr std::size_t waveform_row(std::size_t subcarrier, std::size_t tx, std::size_t rx) {
  return subcarrier * kPairs + tx * kMaxRx + rx;
}

struct CsiEntry {
  std::int8_t re = 0;
  std::int8_t im = 0;
  friend bool operator==(const CsiEntry&, const CsiEntry&) = default;
};

struct CsiPacket {
  std::uint32_t timestamp_us = 0;
  std::uint16_t seq = 0;
  std::uint16_t reserved = 0;
  std::uint8_t n_rx = 3;
  std::uint8_t n_tx = 3;
  std::array<std::uint8_t, 3> rssi{};
  std::int8_t noise_dbm = 0;
  std::uint8_t agc = 0;
  std::uint8_t antenna_sel = 0;
  std::uint16_t rate_code = 0;
  // kSubcarriers * n_tx * n_rx entries, index (sc * n_tx + tx) * n_rx + rx.
  std::vector<CsiEntry> csi;

  const CsiEntry& at(std::size_t sc, std::size_t tx, std::size_t rx) const {
    return csi[(sc * n_tx + tx) * n_rx + rx];
  }
  CsiEntry& at(std::size_t sc, std::size_t tx, std::size_t rx) {
    return csi[(sc * n_tx + tx) * n_rx + rx];
  }

  friend bool operator==(const CsiPacket&, const CsiPacket&) = default;
};

// Complex CSI matrix of kWaveforms rows by (rate_hz * duration_s) columns,
// row-major, plus a presence mask of the same shape.
struct RawCsiSample {
  std::size_t rate_hz = 2000;
  std::size_t duration_s = 4;
  std::vector<std::complex<double>> data;
  std::vector<std::uint8_t> present;

  RawCsiSample() = default;
  RawCsiSample(std::size_t rate, std::size_t duration)
      : rate_hz(rate),
        duration_s(duration),
        data(kWaveforms * rate * duration),
        present(kWaveforms * rate * duration, 1) {}

  std::size_t rows() const { return kWaveforms; }
  std::size_t cols() const { return rate_hz * duration_s; }

  std::complex<double>& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const std::complex<double>& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols() + c];
  }
  bool is_present(std::size_t r, std::size_t c) const { return present[r * cols() + c] != 0; }
  void set_present(std::size_t r, std::size_t c, bool p) { present[r * cols() + c] = p ? 1 : 0; }
};

namespace csil {

inline constexpr std::array<std::uint8_t, 4> kMagic{'C', 'S', 'I', 'L'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kCsiCode = 0xBB;
inline constexpr std::size_t kHeaderBytes = 5;
inline constexpr std::size_t kFixedPayload = 20;

constexpr std::size_t matrix_bytes(std::size_t n_tx, std::size_t n_rx) {
  return kSubcarriers * n_tx * n_rx * 2;
}

namespace detail {

inline std::uint16_t get_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

}  // namespace detail

// Validates a packet against the CsiPacket invariants; throws EncodeError.
inline void validate_packet(const CsiPacket& p, std::size_t index) {
  if (p.n_rx < 1 || p.n_rx > kMaxRx)
    throw EncodeError(index, "n_rx", "must be 1..3, got " + std::to_string(p.n_rx));
  if (p.n_tx < 1 || p.n_tx > kMaxTx)
    throw EncodeError(index, "n_tx", "must be 1..3, got " + std::to_string(p.n_tx));
  const std::size_t want = kSubcarriers * p.n_tx * p.n_rx;
  if (p.csi.size() != want)
    throw EncodeError(index, "csi",
                      "expected " + std::to_string(want) + " entries, got " +
                          std::to_string(p.csi.size()));
}

inline void append_packet(std::vector<std::uint8_t>& out, const CsiPacket& p, std::size_t index) {
  validate_packet(p, index);
  using namespace detail;
  const std::size_t mlen = matrix_bytes(p.n_tx, p.n_rx);
  const std::size_t length = 1 + kFixedPayload + mlen;
  out.push_back(static_cast<std::uint8_t>(length >> 8));
  out.push_back(static_cast<std::uint8_t>(length & 0xFF));
  out.push_back(kCsiCode);
  put_u32le(out, p.timestamp_us);
  put_u16le(out, p.seq);
  put_u16le(out, p.reserved);
  out.push_back(p.n_rx);
  out.push_back(p.n_tx);
  for (auto r : p.rssi) out.push_back(r);
  out.push_back(static_cast<std::uint8_t>(p.noise_dbm));
  out.push_back(p.agc);
  out.push_back(p.antenna_sel);
  put_u16le(out, static_cast<std::uint16_t>(mlen));
  put_u16le(out, p.rate_code);
  for (const auto& e : p.csi) {
    out.push_back(static_cast<std::uint8_t>(e.re));
    out.push_back(static_cast<std::uint8_t>(e.im));
  }
}

inline std::vector<std::uint8_t> write_log(std::span<const CsiPacket> packets) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(kVersion);
  for (std::size_t i = 0; i < packets.size(); ++i) append_packet(out, packets[i], i);
  return out;
}

// Decodes a complete CSIL stream. Non-CSI records are skipped; every other
// deviation from the grammar raises a positioned error.
inline std::vector<CsiPacket> parse_log(std::span<const std::uint8_t> bytes) {
  using namespace detail;
  if (bytes.size() < kHeaderBytes)
    throw FormatError("stream shorter than the 5-byte CSIL header");
  for (std::size_t i = 0; i < kMagic.size(); ++i)
    if (bytes[i] != kMagic[i]) throw FormatError("bad magic, expected \"CSIL\"");
  if (bytes[4] != kVersion)
    throw FormatError("unsupported CSIL version " + std::to_string(bytes[4]));

  std::vector<CsiPacket> packets;
  std::size_t pos = kHeaderBytes;
  std::size_t record = 0;
  while (pos < bytes.size()) {
    const std::size_t start = pos;
    if (bytes.size() - pos < 2) throw TruncationError(start, "incomplete length field");
    const std::size_t length = (static_cast<std::size_t>(bytes[pos]) << 8) | bytes[pos + 1];
    pos += 2;
    if (length == 0) throw CorruptRecordError(record, start, "zero record length");
    if (length > bytes.size() - pos)
      throw TruncationError(start, "declared length " + std::to_string(length) + " but only " +
                                       std::to_string(bytes.size() - pos) + " bytes remain");
    const std::uint8_t code = bytes[pos];
    const std::uint8_t* payload = bytes.data() + pos + 1;
    const std::size_t payload_len = length - 1;
    pos += length;

    if (code != kCsiCode) {
      ++record;
      continue;
    }
    if (payload_len < kFixedPayload)
      throw CorruptRecordError(record, start, "CSI payload shorter than fixed header");

    CsiPacket p;
    p.timestamp_us = get_u32le(payload);
    p.seq = get_u16le(payload + 4);
    p.reserved = get_u16le(payload + 6);
    p.n_rx = payload[8];
    p.n_tx = payload[9];
    p.rssi = {payload[10], payload[11], payload[12]};
    p.noise_dbm = static_cast<std::int8_t>(payload[13]);
    p.agc = payload[14];
    p.antenna_sel = payload[15];
    const std::size_t mlen = get_u16le(payload + 16);
    p.rate_code = get_u16le(payload + 18);

    if (p.n_rx < 1 || p.n_rx > kMaxRx)
      throw CorruptRecordError(record, start, "n_rx out of range: " + std::to_string(p.n_rx));
    if (p.n_tx < 1 || p.n_tx > kMaxTx)
      throw CorruptRecordError(record, start, "n_tx out of range: " + std::to_string(p.n_tx));
    if (mlen != matrix_bytes(p.n_tx, p.n_rx))
      throw CorruptRecordError(record, start,
                               "matrix_len " + std::to_string(mlen) + " does not match " +
                                   std::to_string(matrix_bytes(p.n_tx, p.n_rx)));
    if (payload_len != kFixedPayload + mlen)
      throw CorruptRecordError(record, start, "record length disagrees with matrix_len");

    const std::uint8_t* m = payload + kFixedPayload;
    p.csi.resize(mlen / 2);
    for (std::size_t i = 0; i < p.csi.size(); ++i) {
      p.csi[i].re = static_cast<std::int8_t>(m[2 * i]);
      p.csi[i].im = static_cast<std::int8_t>(m[2 * i + 1]);
    }
    packets.push_back(std::move(p));
    ++record;
  }
  return packets;
}

}  // namespace csil

using csil::parse_log;
using csil::write_log;

// Slots a timestamp-sorted packet stream into a fixed window of
// rate_hz * duration_s columns. A packet lands in slot
// floor((ts - t0) * rate_hz / 1e6); later packets overwrite earlier ones in the
// same slot. Packets past the window are dropped. Slots without a packet are
// absent on every row; tx streams a packet does not carry are absent in its
// slot. Packets reporting fewer than three rx chains are not slotted.
inline RawCsiSample packets_to_sample(std::span<const CsiPacket> packets, std::size_t rate_hz,
                                      std::size_t duration_s) {
  if (rate_hz == 0 || duration_s == 0) throw ParameterError("rate and duration must be positive");
  RawCsiSample s(rate_hz, duration_s);
  std::fill(s.present.begin(), s.present.end(), 0);
  if (packets.empty()) throw DataError("empty capture: no packets");

  const std::uint64_t t0 = packets.front().timestamp_us;
  const std::size_t cols = s.cols();
  std::size_t filled = 0;
  std::vector<std::uint8_t> slot_used(cols, 0);
  for (const auto& p : packets) {
    if (p.timestamp_us < t0) throw DataError("packets are not sorted by timestamp");
    const std::uint64_t slot = (static_cast<std::uint64_t>(p.timestamp_us) - t0) * rate_hz / 1000000u;
    if (slot >= cols) continue;
    if (p.n_rx != kMaxRx || p.n_tx < 1 || p.n_tx > kMaxTx ||
        p.csi.size() != kSubcarriers * p.n_tx * p.n_rx)
      continue;
    const std::size_t c = static_cast<std::size_t>(slot);
    if (!slot_used[c]) {
      slot_used[c] = 1;
      ++filled;
    }
    for (std::size_t sc = 0; sc < kSubcarriers; ++sc)
      for (std::size_t tx = 0; tx < kMaxTx; ++tx)
        for (std::size_t rx = 0; rx < kMaxRx; ++rx) {
          const std::size_t row = waveform_row(sc, tx, rx);
          if (tx < p.n_tx) {
            const auto& e = p.at(sc, tx, rx);
            s(row, c) = {static_cast<double>(e.re), static_cast<double>(e.im)};
            s.set_present(row, c, true);
          } else {
            s(row, c) = {0.0, 0.0};
            s.set_present(row, c, false);
          }
        }
  }
  if (filled == 0) throw DataError("empty capture: no packet fell inside the sample window");
  return s;
}

// Inverse of packets_to_sample for writing synthetic captures: one packet per
// slot at exact 1e6/rate_hz spacing, entries multiplied by `scale` and rounded
// to i8. A packet carries the leading run of present tx streams, since the
// format can only express "streams 0..n_tx-1". Slots with tx0 absent emit no
// packet.
inline std::vector<CsiPacket> sample_to_packets(const RawCsiSample& s, double scale,
                                                std::uint32_t t0_us = 0) {
  auto quantize = [scale](double v) {
    const double q = std::nearbyint(v * scale);
    return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
  };
  std::vector<CsiPacket> out;
  out.reserve(s.cols());
  for (std::size_t c = 0; c < s.cols(); ++c) {
    std::uint8_t n_tx = 0;
    while (n_tx < kMaxTx && s.is_present(waveform_row(0, n_tx, 0), c)) ++n_tx;
    if (n_tx == 0) continue;
    CsiPacket p;
    p.timestamp_us = t0_us + static_cast<std::uint32_t>(c * 1000000u / s.rate_hz);
    p.seq = static_cast<std::uint16_t>(c);
    p.n_tx = n_tx;
    p.n_rx = kMaxRx;
    p.csi.resize(kSubcarriers * n_tx * kMaxRx);
    for (std::size_t sc = 0; sc < kSubcarriers; ++sc)
      for (std::size_t tx = 0; tx < n_tx; ++tx)
        for (std::size_t rx = 0; rx < kMaxRx; ++rx) {
          const auto v = s(waveform_row(sc, tx, rx), c);
          p.at(sc, tx, rx) = {quantize(v.real()), quantize(v.imag())};
        }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace csigait
