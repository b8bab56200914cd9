#include "pdeshard/partition.hpp"

#include <sstream>

#include "pdeshard/error.hpp"

namespace pdeshard {

Direction mirror(Direction d) noexcept {
  switch (d) {
    case Direction::N: return Direction::S;
    case Direction::S: return Direction::N;
    case Direction::E: return Direction::W;
    case Direction::W: return Direction::E;
    case Direction::NE: return Direction::SW;
    case Direction::NW: return Direction::SE;
    case Direction::SE: return Direction::NW;
    case Direction::SW: return Direction::NE;
  }
  return d;
}

std::string_view to_string(Direction d) noexcept {
  static constexpr std::array<std::string_view, kNumDirections> names = {"N", "S", "E", "W", "NE", "NW", "SE", "SW"};
  return names[static_cast<int>(d)];
}

std::array<int, 2> offset(Direction d) noexcept {
  switch (d) {
    case Direction::N: return {-1, 0};
    case Direction::S: return {1, 0};
    case Direction::E: return {0, 1};
    case Direction::W: return {0, -1};
    case Direction::NE: return {-1, 1};
    case Direction::NW: return {-1, -1};
    case Direction::SE: return {1, 1};
    case Direction::SW: return {1, -1};
  }
  return {0, 0};
}

int SubdomainSpec::neighbor_count() const noexcept {
  int n = 0;
  for (int r : neighbors) n += r != kBoundary;
  return n;
}

int Partition::messages_per_step() const noexcept {
  int n = 0;
  for (const auto& s : ranks) n += s.neighbor_count();
  return n;
}

namespace {

std::string divisors_of(int n) {
  std::ostringstream os;
  for (int d = 1; d <= n; ++d)
    if (n % d == 0) os << (d > 1 ? ", " : "") << d;
  return os.str();
}

}  // namespace

Partition make_partition(int global_h, int global_w, int px, int py, nn::PaddingStrategy strategy) {
  if (global_h < 1 || global_w < 1) throw ConfigError("make_partition: empty grid");
  if (px < 1 || py < 1) throw ConfigError("make_partition: px and py must be >= 1");
  if (global_w % px != 0)
    throw ConfigError("make_partition: width " + std::to_string(global_w) + " not divisible by px=" +
                      std::to_string(px) + "; valid px: " + divisors_of(global_w));
  if (global_h % py != 0)
    throw ConfigError("make_partition: height " + std::to_string(global_h) + " not divisible by py=" +
                      std::to_string(py) + "; valid py: " + divisors_of(global_h));
  Partition p;
  p.global_h = global_h;
  p.global_w = global_w;
  p.px = px;
  p.py = py;
  p.strategy = strategy;
  p.halo = nn::halo_width(strategy);
  const int rows = global_h / py;
  const int cols = global_w / px;
  for (int ry = 0; ry < py; ++ry) {
    for (int rx = 0; rx < px; ++rx) {
      SubdomainSpec s;
      s.rank = ry * px + rx;
      s.rx = rx;
      s.ry = ry;
      s.core = {ry * rows, rx * cols, rows, cols};
      for (Direction d : kAllDirections) {
        const auto [dr, dc] = offset(d);
        const int ny = ry + dr;
        const int nx = rx + dc;
        s.neighbors[static_cast<int>(d)] = (ny < 0 || ny >= py || nx < 0 || nx >= px) ? kBoundary : ny * px + nx;
      }
      p.ranks.push_back(s);
    }
  }
  return p;
}

Tensor3 extract_input(const Tensor3& global, const SubdomainSpec& spec, int halo) {
  const auto& c = spec.core;
  if (halo < 0 || c.row0 < 0 || c.col0 < 0 || c.row0 + c.rows > global.h() || c.col0 + c.cols > global.w())
    throw ShapeError("extract_input: subdomain core outside the " + std::to_string(global.h()) + "x" +
                     std::to_string(global.w()) + " tensor");
  return slice_region(global, c.row0 - halo, c.col0 - halo, c.rows + 2 * halo, c.cols + 2 * halo,
                      OutOfBoundsPolicy::ZeroFill);
}

namespace {

// Top-left corner of the strip for direction d inside an R x C core.
std::array<int, 4> strip_box(Direction d, int rows, int cols, int halo) {
  const auto [dr, dc] = offset(d);
  const int r0 = dr < 0 ? 0 : dr > 0 ? rows - halo : 0;
  const int nr = dr == 0 ? rows : halo;
  const int c0 = dc < 0 ? 0 : dc > 0 ? cols - halo : 0;
  const int nc = dc == 0 ? cols : halo;
  return {r0, c0, nr, nc};
}

}  // namespace

std::array<Tensor3, kNumDirections> halo_strips(const Tensor3& local, int halo) {
  if (halo < 1 || halo > local.h() || halo > local.w())
    throw ShapeError("halo_strips: halo " + std::to_string(halo) + " exceeds core " + std::to_string(local.h()) +
                     "x" + std::to_string(local.w()));
  std::array<Tensor3, kNumDirections> out;
  for (Direction d : kAllDirections) {
    const auto [r0, c0, nr, nc] = strip_box(d, local.h(), local.w(), halo);
    out[static_cast<int>(d)] = slice_region(local, r0, c0, nr, nc);
  }
  return out;
}

Tensor3 with_halo(const Tensor3& core, const std::array<std::optional<Tensor3>, kNumDirections>& received,
                  int halo) {
  Tensor3 out(core.c(), core.h() + 2 * halo, core.w() + 2 * halo);
  place_region(out, core, halo, halo);
  for (Direction d : kAllDirections) {
    const auto& strip = received[static_cast<int>(d)];
    if (!strip) continue;
    const auto [dr, dc] = offset(d);
    const int r0 = dr < 0 ? 0 : dr > 0 ? halo + core.h() : halo;
    const int c0 = dc < 0 ? 0 : dc > 0 ? halo + core.w() : halo;
    const int nr = dr == 0 ? core.h() : halo;
    const int nc = dc == 0 ? core.w() : halo;
    if (strip->c() != core.c() || strip->h() != nr || strip->w() != nc)
      throw ShapeError("with_halo: strip from " + std::string(to_string(d)) + " has wrong shape");
    place_region(out, *strip, r0, c0);
  }
  return out;
}

Tensor3 assemble(const std::vector<Tensor3>& outputs, const Partition& p) {
  if (static_cast<int>(outputs.size()) != p.rank_count())
    throw ShapeError("assemble: expected " + std::to_string(p.rank_count()) + " rank outputs, got " +
                     std::to_string(outputs.size()));
  const int c = outputs.empty() ? 0 : outputs.front().c();
  Tensor3 global(c, p.global_h, p.global_w);
  for (const auto& s : p.ranks) {
    const Tensor3& o = outputs[s.rank];
    if (o.c() != c || o.h() != s.core.rows || o.w() != s.core.cols)
      throw ShapeError("assemble: rank " + std::to_string(s.rank) + " output has wrong shape");
    place_region(global, o, s.core.row0, s.core.col0);
  }
  return global;
}

std::vector<Tensor3> split(const Tensor3& global, const Partition& p) {
  if (global.h() != p.global_h || global.w() != p.global_w)
    throw ShapeError("split: tensor does not match partition grid");
  std::vector<Tensor3> out;
  out.reserve(p.ranks.size());
  for (const auto& s : p.ranks) out.push_back(slice_region(global, s.core.row0, s.core.col0, s.core.rows, s.core.cols));
  return out;
}

}  // namespace pdeshard
