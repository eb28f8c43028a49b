#pragma once

// CSIM checkpoint:
//   "CSIM" version:u8
//   config: in_channels in_h in_w classes stage_count (u32), then per stage
//           width:u32 blocks:u32
//   tensor_count:u32, then per tensor in graph order:
//           rank:u32 dims:u32[rank] data:f64[prod(dims)]
// Ranks drop trailing unit dims (dense bias and batch-norm vectors are rank 1,
// dense weight rank 2, convolution kernels rank 4). All integers little-endian.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "csigait/io.hpp"
#include "csigait/nn/resnet.hpp"

namespace csigait::nn {

inline constexpr std::uint8_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> encode_checkpoint(ResNet& model) {
  using io::detail::put_f64;
  using io::detail::put_u32;
  const auto& cfg = model.config();
  std::vector<std::uint8_t> out{'C', 'S', 'I', 'M', kCheckpointVersion};
  put_u32(out, static_cast<std::uint32_t>(cfg.in_channels));
  put_u32(out, static_cast<std::uint32_t>(cfg.in_h));
  put_u32(out, static_cast<std::uint32_t>(cfg.in_w));
  put_u32(out, static_cast<std::uint32_t>(cfg.classes));
  put_u32(out, 4);
  for (std::size_t s = 0; s < 4; ++s) {
    put_u32(out, static_cast<std::uint32_t>(cfg.widths[s]));
    put_u32(out, static_cast<std::uint32_t>(cfg.blocks[s]));
  }
  const auto tensors = model.state_tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    auto dims = t->dims();
    std::size_t rank = 4;
    while (rank > 1 && dims[rank - 1] == 1) --rank;
    put_u32(out, static_cast<std::uint32_t>(rank));
    for (std::size_t i = 0; i < rank; ++i) put_u32(out, static_cast<std::uint32_t>(dims[i]));
    for (double v : t->data) put_f64(out, v);
  }
  return out;
}

// Rebuilds the network described by the checkpoint. Training hyperparameters
// come from `base`; architecture fields come from the file.
inline ResNet decode_checkpoint(std::span<const std::uint8_t> bytes, ModelConfig base = {}) {
  io::detail::Reader r(bytes, "checkpoint");
  r.expect("CSIM");
  const auto version = r.u8();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  base.in_channels = r.u32();
  base.in_h = r.u32();
  base.in_w = r.u32();
  base.classes = r.u32();
  if (r.u32() != 4) throw FormatError("checkpoint must describe four stages");
  for (std::size_t s = 0; s < 4; ++s) {
    base.widths[s] = r.u32();
    base.blocks[s] = r.u32();
  }
  ResNet model(base);
  auto tensors = model.state_tensors();
  const auto count = r.u32();
  if (count != tensors.size())
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model needs " +
                      std::to_string(tensors.size()));
  for (auto& [name, t] : tensors) {
    const auto rank = r.u32();
    if (rank < 1 || rank > 4) throw FormatError("tensor " + name + ": bad rank " + std::to_string(rank));
    std::array<std::size_t, 4> dims{1, 1, 1, 1};
    for (std::uint32_t i = 0; i < rank; ++i) dims[i] = r.u32();
    if (dims != t->dims()) throw ShapeError("tensor " + name + " has unexpected dims in checkpoint");
    for (auto& v : t->data) v = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");
  return model;
}

inline void save_checkpoint(const std::filesystem::path& p, ResNet& model) {
  io::write_bytes(p, encode_checkpoint(model));
}

inline ResNet load_checkpoint(const std::filesystem::path& p, ModelConfig base = {}) {
  return decode_checkpoint(io::read_bytes(p), base);
}

}  // namespace csigait::nn
