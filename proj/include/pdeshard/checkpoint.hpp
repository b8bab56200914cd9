#pragma once

#include <filesystem>

#include "pdeshard/neural.hpp"

namespace pdeshard::nn {

struct Checkpoint {
  ConvNet net;
  AdamState adam;
};

// Checkpoint layout, little-endian:
//   8   magic "PDSHCKPT"
//   4   u32 version (= 1)
//   8   f64 leaky slope
//   4   u32 layer count L
//   L x (u32 in_ch, u32 out_ch, u32 k, u32 pad_mode)
//   L x (weights f64[out*in*k*k], bias f64[out])
//   f64 eta, rho1, rho2, eps; u64 t
//   L x (m.weights, m.bias), then L x (v.weights, v.bias)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws IoError, FormatError or TruncatedError.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace pdeshard::nn
