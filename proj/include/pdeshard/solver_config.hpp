#pragma once

#include <cstdint>

namespace pdeshard {

// Parameters of one linearized-Euler run. Units are nondimensional with
// rho_c = p_c = 1, so pressure and velocity perturbations share a scale.
struct SolverConfig {
  std::uint32_t n = 256;  // cells per direction
  std::uint32_t t_steps = 1500;  // output frames, including the initial condition
  double extent = 2.0;  // domain is [-extent, extent]^2
  double gamma = 1.4;
  double rho_c = 1.0;
  double p_c = 1.0;
  double uc_x = 0.0;
  double uc_y = 0.0;
  double pulse_amp = 0.5;
  double pulse_hw = 0.3;  // half width at half maximum
  double pulse_cx = 0.0;
  double pulse_cy = 0.0;
  double cfl = 0.4;

  /// Throws ConfigError naming the first violated bound.
  void validate() const;

  double dx() const noexcept { return 2.0 * extent / n; }
  double sound_speed() const noexcept;
  /// cfl * dx / (|u_c| + c)
  double dt() const noexcept;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

}  // namespace pdeshard
