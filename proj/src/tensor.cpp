#include "pdeshard/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pdeshard/error.hpp"

namespace pdeshard {

Tensor3::Tensor3(int c, int h, int w, double fill) : c_(c), h_(h), w_(w) {
  if (c < 0 || h < 0 || w < 0) throw ShapeError("Tensor3: negative dimension");
  data_.assign(static_cast<std::size_t>(c) * h * w, fill);
}

Tensor3::Tensor3(int c, int h, int w, std::vector<double> data)
    : c_(c), h_(h), w_(w), data_(std::move(data)) {
  if (c < 0 || h < 0 || w < 0) throw ShapeError("Tensor3: negative dimension");
  if (data_.size() != static_cast<std::size_t>(c) * h * w)
    throw ShapeError("Tensor3: data length " + std::to_string(data_.size()) + " != c*h*w");
}

bool Tensor3::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor3::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Tensor3 slice_region(const Tensor3& t, int row0, int col0, int rows, int cols, OutOfBoundsPolicy fill) {
  if (rows < 1 || cols < 1) throw ShapeError("slice_region: empty region");
  const bool inside = row0 >= 0 && col0 >= 0 && row0 + rows <= t.h() && col0 + cols <= t.w();
  if (!inside && fill == OutOfBoundsPolicy::Strict)
    throw ShapeError("slice_region: region (" + std::to_string(row0) + "," + std::to_string(col0) + "," +
                     std::to_string(rows) + "," + std::to_string(cols) + ") outside " + std::to_string(t.h()) +
                     "x" + std::to_string(t.w()) + " grid");
  Tensor3 out(t.c(), rows, cols);
  const int r_lo = std::max(0, -row0);
  const int r_hi = std::min(rows, t.h() - row0);
  const int c_lo = std::max(0, -col0);
  const int c_hi = std::min(cols, t.w() - col0);
  if (r_lo >= r_hi || c_lo >= c_hi) return out;
  for (int ch = 0; ch < t.c(); ++ch)
    for (int r = r_lo; r < r_hi; ++r)
      std::copy_n(t.row(ch, row0 + r) + col0 + c_lo, c_hi - c_lo, out.row(ch, r) + c_lo);
  return out;
}

void place_region(Tensor3& dst, const Tensor3& block, int row0, int col0) {
  if (block.c() != dst.c() || row0 < 0 || col0 < 0 || row0 + block.h() > dst.h() ||
      col0 + block.w() > dst.w())
    throw ShapeError("place_region: block does not fit destination");
  for (int ch = 0; ch < block.c(); ++ch)
    for (int r = 0; r < block.h(); ++r) std::copy_n(block.row(ch, r), block.w(), dst.row(ch, row0 + r) + col0);
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace pdeshard
