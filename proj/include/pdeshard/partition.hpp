#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "pdeshard/neural.hpp"
#include "pdeshard/tensor.hpp"

namespace pdeshard {

// Row 0 is the north edge of the grid, column 0 the west edge.
enum class Direction : int { N = 0, S, E, W, NE, NW, SE, SW };
inline constexpr int kNumDirections = 8;
inline constexpr std::array<Direction, kNumDirections> kAllDirections = {
    Direction::N, Direction::S, Direction::E, Direction::W, Direction::NE, Direction::NW, Direction::SE, Direction::SW};

Direction mirror(Direction d) noexcept;
std::string_view to_string(Direction d) noexcept;
/// (row, col) step towards the neighbor in direction d.
std::array<int, 2> offset(Direction d) noexcept;

inline constexpr int kBoundary = -1;

struct CoreRegion {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;
  friend bool operator==(const CoreRegion&, const CoreRegion&) = default;
};

struct SubdomainSpec {
  int rank = 0;
  int rx = 0;  // column block index
  int ry = 0;  // row block index
  CoreRegion core;
  std::array<int, kNumDirections> neighbors{};  // rank id or kBoundary

  int neighbor(Direction d) const noexcept { return neighbors[static_cast<int>(d)]; }
  int neighbor_count() const noexcept;
};

struct Partition {
  int global_h = 0;
  int global_w = 0;
  int px = 1;  // blocks along columns
  int py = 1;  // blocks along rows
  nn::PaddingStrategy strategy = nn::PaddingStrategy::ZeroInner;
  int halo = 0;
  std::vector<SubdomainSpec> ranks;  // row-major: rank = ry * px + rx

  int rank_count() const noexcept { return static_cast<int>(ranks.size()); }
  /// Directed halo messages per exchange step (sum of neighbor counts).
  int messages_per_step() const noexcept;
};

/// Throws ConfigError when the grid does not divide evenly; the message
/// lists the valid block counts.
Partition make_partition(int global_h, int global_w, int px, int py, nn::PaddingStrategy strategy);

/// Core of `spec` widened by `halo` cells per side, copied from the global
/// tensor; cells past the physical boundary are zero.
Tensor3 extract_input(const Tensor3& global, const SubdomainSpec& spec, int halo);

/// The 8 boundary strips of a core tensor, indexed by Direction: the strip
/// for d is what the neighbor in direction d needs as its halo.
std::array<Tensor3, kNumDirections> halo_strips(const Tensor3& local, int halo);

/// Surrounds `core` with a halo: received[d] is the strip coming from the
/// neighbor in direction d, and missing entries (physical boundary) stay zero.
Tensor3 with_halo(const Tensor3& core, const std::array<std::optional<Tensor3>, kNumDirections>& received,
                  int halo);

/// Inverse of the decomposition: places outputs[rank] at its core origin.
Tensor3 assemble(const std::vector<Tensor3>& outputs, const Partition& p);

/// Plain core slices of a global tensor, one per rank.
std::vector<Tensor3> split(const Tensor3& global, const Partition& p);

}  // namespace pdeshard
