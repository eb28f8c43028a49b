#pragma once

// File formats shared by the CLI: raw byte files, TEN1 tensors, PGM heatmaps
// and CSV exports.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csigait/error.hpp"
#include "csigait/matrix.hpp"
#include "csigait/metrics.hpp"
#include "csigait/spectral.hpp"

namespace csigait::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write failed for " + p.string());
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  write_bytes(p, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

// Bounds-checked little-endian reader.
class Reader {
public:
  Reader(std::span<const std::uint8_t> b, std::string what) : b_(b), what_(std::move(what)) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  void expect(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(b_.data() + pos_, magic.data(), magic.size()) != 0)
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    pos_ += magic.size();
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }

private:
  void need(std::size_t n) {
    if (b_.size() - pos_ < n) throw TruncationError(pos_, what_);
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace detail

// TEN1: magic "TEN1", rank u32, dims u32 each, float64 data row-major.
struct TensorFile {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

inline std::vector<std::uint8_t> encode_tensor(const TensorFile& t) {
  std::size_t n = 1;
  for (auto d : t.dims) n *= d;
  if (n != t.data.size()) throw ShapeError("tensor dims do not match data length");
  std::vector<std::uint8_t> out{'T', 'E', 'N', '1'};
  detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u32(out, d);
  for (double v : t.data) detail::put_f64(out, v);
  return out;
}

inline TensorFile decode_tensor(std::span<const std::uint8_t> bytes, const std::string& what = "tensor") {
  detail::Reader r(bytes, what);
  r.expect("TEN1");
  TensorFile t;
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 8) throw FormatError(what + ": unsupported rank " + std::to_string(rank));
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(r.u32());
    n *= t.dims.back();
  }
  if (n * 8 != bytes.size() - r.pos()) throw FormatError(what + ": payload size does not match dims");
  t.data.resize(n);
  for (auto& v : t.data) v = r.f64();
  return t;
}

inline void write_matrix(const std::filesystem::path& p, const Matrix& m) {
  write_bytes(p, encode_tensor({{static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)}, m.data}));
}

inline Matrix read_matrix(const std::filesystem::path& p) {
  auto t = decode_tensor(read_bytes(p), p.string());
  if (t.dims.size() != 2) throw ShapeError(p.string() + ": expected a rank-2 tensor");
  Matrix m(t.dims[0], t.dims[1]);
  m.data = std::move(t.data);
  return m;
}

inline void write_tensor(const std::filesystem::path& p, const TensorFile& t) { write_bytes(p, encode_tensor(t)); }
inline TensorFile read_tensor(const std::filesystem::path& p) { return decode_tensor(read_bytes(p), p.string()); }

// Binary 8-bit graymap (P5); values are clamped to [0, 255].
inline std::vector<std::uint8_t> encode_pgm(const Matrix& img) {
  const std::string header = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : img.data) out.push_back(static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)));
  return out;
}

struct PgmInfo {
  std::size_t width = 0, height = 0;
};

inline PgmInfo pgm_info(std::span<const std::uint8_t> bytes) {
  std::string head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 64)));
  std::istringstream in(head);
  std::string magic;
  PgmInfo info;
  int maxv = 0;
  if (!(in >> magic >> info.width >> info.height >> maxv) || magic != "P5") throw FormatError("not a P5 graymap");
  return info;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Line 1: "freqs_hz" then bin centers; line 2: "times_s" then frame centers;
// then one line per bin ("bin<k>" followed by the power in each frame).
inline std::string spectrogram_csv(const Spectrogram& s) {
  std::ostringstream os;
  os << "freqs_hz";
  for (double f : s.freqs_hz) os << ',' << fmt(f);
  os << "\ntimes_s";
  for (double t : s.times_s) os << ',' << fmt(t);
  os << '\n';
  for (std::size_t k = 0; k < s.bins(); ++k) {
    os << "bin" << k;
    for (std::size_t f = 0; f < s.frames(); ++f) os << ',' << fmt(s.power(k, f));
    os << '\n';
  }
  return os.str();
}

// Header: "true\\pred" and one column per predicted class; rows per true class.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\pred";
  for (std::size_t j = 0; j < cm.classes; ++j) os << ',' << cm.name(j);
  os << '\n';
  for (std::size_t i = 0; i < cm.classes; ++i) {
    os << cm.name(i);
    for (std::size_t j = 0; j < cm.classes; ++j) os << ',' << cm(i, j);
    os << '\n';
  }
  return os.str();
}

// Row-normalized counts, 255 = whole row in one cell.
inline Matrix confusion_image(const ConfusionMatrix& cm) {
  Matrix img(cm.classes, cm.classes);
  for (std::size_t i = 0; i < cm.classes; ++i) {
    const double row = static_cast<double>(cm.row_sum(i));
    for (std::size_t j = 0; j < cm.classes; ++j)
      img(i, j) = row > 0 ? std::round(255.0 * static_cast<double>(cm(i, j)) / row) : 0.0;
  }
  return img;
}

// Columns class, precision, recall, f1, support, undefined; a final "macro"
// row carries the unweighted means and the total support.
inline std::string report_csv(const ClassReport& r, const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "class,precision,recall,f1,support,undefined\n";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& c = r.classes[i];
    os << cm.name(i) << ',' << fmt(c.precision) << ',' << fmt(c.recall) << ',' << fmt(c.f1) << ',' << c.support << ','
       << (c.undefined ? 1 : 0) << '\n';
  }
  os << "macro," << fmt(r.macro_precision) << ',' << fmt(r.macro_recall) << ',' << fmt(r.macro_f1) << ','
     << r.total_support << ",0\n";
  return os.str();
}

// Minimal CSV reader: comma-separated fields, no quoting.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) fields.push_back(cell);
    if (line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline std::string read_text(const std::filesystem::path& p) {
  const auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

}  // namespace csigait::io
