#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pdeshard/solver_config.hpp"
#include "pdeshard/tensor.hpp"

namespace pdeshard {

/// One simulation frame: the four perturbation fields on an h x w grid.
/// Construction rejects non-finite values; the object is immutable afterwards.
class Snapshot {
 public:
  Snapshot() = default;
  Snapshot(int h, int w);  // all zeros
  explicit Snapshot(Tensor3 fields);

  int h() const noexcept { return fields_.h(); }
  int w() const noexcept { return fields_.w(); }
  double operator()(Channel ch, int r, int c) const noexcept { return fields_(ch, r, c); }
  const Tensor3& tensor() const noexcept { return fields_; }

  friend bool operator==(const Snapshot&, const Snapshot&) = default;

 private:
  Tensor3 fields_;
};

Tensor3 snapshot_to_tensor(const Snapshot& s);
/// Throws ShapeError unless t has 4 channels, NumericError on NaN/Inf.
Snapshot tensor_to_snapshot(Tensor3 t);

/// Ordered frames of one run. `first_index` is the time index of frames[0]
/// in the run that produced them and `stride` the number of solver steps
/// between consecutive frames; rollouts use both to line up with the truth.
struct Dataset {
  std::vector<Snapshot> frames;
  double dt = 0.0;
  SolverConfig meta;
  std::uint32_t first_index = 0;
  std::uint32_t stride = 1;

  int h() const noexcept { return frames.empty() ? 0 : frames.front().h(); }
  int w() const noexcept { return frames.empty() ? 0 : frames.front().w(); }
  std::size_t size() const noexcept { return frames.size(); }

  /// Checks frame count >= 1 and shared frame shape. Training requires >= 2
  /// frames and checks that itself.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Dataset file layout, all little-endian:
//
//   offset  size  field
//   0       8     magic "PDSHDATA"
//   8       4     u32 version (= 1)
//   12      4     u32 T (frame count)
//   16      4     u32 h
//   20      4     u32 w
//   24      8     f64 dt
//   32      4     u32 first_index
//   36      4     u32 stride
//   40      4     u32 meta.n
//   44      4     u32 meta.t_steps
//   48      88    f64 x 11: extent, gamma, rho_c, p_c, uc_x, uc_y,
//                 pulse_amp, pulse_hw, pulse_cx, pulse_cy, cfl
//   136     ...   T frames, each 4 planes [rho, ux, uy, p] of h*w f64,
//                 row-major
inline constexpr std::size_t kDatasetHeaderBytes = 136;
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(const Dataset& d, const std::filesystem::path& path);
/// Throws IoError, FormatError (magic/version) or TruncatedError.
Dataset read_dataset(const std::filesystem::path& path);

/// 64-bit FNV-1a over a file's bytes; used for reproducibility stamps.
std::uint64_t file_hash(const std::filesystem::path& path);
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace pdeshard
