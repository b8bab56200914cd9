#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace pdeshard {

// Channel layout of every snapshot and every network input/output.
enum Channel : int { kRho = 0, kUx = 1, kUy = 2, kP = 3 };
inline constexpr int kNumChannels = 4;
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames = {"rho", "ux", "uy",
                                                                             "p"};

/// Dense C x H x W array of doubles, channel-major then row then column.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int c, int h, int w, double fill = 0.0);
  Tensor3(int c, int h, int w, std::vector<double> data);

  int c() const noexcept { return c_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(h_) * w_; }

  double& operator()(int ch, int r, int col) noexcept {
    return data_[(static_cast<std::size_t>(ch) * h_ + r) * w_ + col];
  }
  double operator()(int ch, int r, int col) const noexcept {
    return data_[(static_cast<std::size_t>(ch) * h_ + r) * w_ + col];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> plane(int ch) noexcept { return data().subspan(ch * plane_size(), plane_size()); }
  std::span<const double> plane(int ch) const noexcept {
    return data().subspan(ch * plane_size(), plane_size());
  }
  double* row(int ch, int r) noexcept { return data_.data() + (static_cast<std::size_t>(ch) * h_ + r) * w_; }
  const double* row(int ch, int r) const noexcept {
    return data_.data() + (static_cast<std::size_t>(ch) * h_ + r) * w_;
  }

  bool same_shape(const Tensor3& o) const noexcept {
    return c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  bool all_finite() const noexcept;
  void fill(double v) noexcept;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<double> data_;
};

enum class OutOfBoundsPolicy { Strict, ZeroFill };

/// Copies the rows x cols window whose top-left corner is (row0, col0).
/// The window may hang over the grid edge only under ZeroFill, where the
/// missing cells read as 0.0.
Tensor3 slice_region(const Tensor3& t, int row0, int col0, int rows, int cols,
                     OutOfBoundsPolicy fill = OutOfBoundsPolicy::Strict);

/// Writes `block` into `dst` with its top-left corner at (row0, col0).
/// The block must fit entirely.
void place_region(Tensor3& dst, const Tensor3& block, int row0, int col0);

double max_abs_diff(const Tensor3& a, const Tensor3& b);

}  // namespace pdeshard
