#pragma once

#include "pdeshard/field.hpp"
#include "pdeshard/solver_config.hpp"

namespace pdeshard::euler {

// Constant state the equations are linearized around.
struct BackgroundState {
  double rho_c = 1.0;
  double p_c = 1.0;
  double uc_x = 0.0;
  double uc_y = 0.0;
  double gamma = 1.4;

  static BackgroundState from(const SolverConfig& cfg);
  double sound_speed() const noexcept;
  /// Largest Rusanov dissipation speed: |u_c| + c.
  double max_wave_speed() const noexcept;
};

// Forward-Euler Rusanov steps are stable while
// dt * ((|uc_x| + c) + (|uc_y| + c)) / dx <= 1; step() refuses anything larger.
inline constexpr double kStabilityLimit = 1.0;

/// x coordinate of cell column i (cell centers of a uniform grid).
double cell_center(int i, const SolverConfig& cfg) noexcept;

/// Gaussian pressure pulse p' = amp * exp(-ln2 * r^2 / hw^2), fluid at rest,
/// zero density perturbation.
Snapshot initial_condition(const SolverConfig& cfg);

/// One explicit step of the linearized Euler system with first-order
/// Rusanov fluxes. Outflow boundaries: ghost cells carry p' = 0 and copy
/// rho', ux', uy' from the adjacent interior cell.
///
/// Throws CflError when dt breaks the stability limit, NumericError when
/// the new state contains NaN/Inf.
Snapshot step(const Snapshot& s, const BackgroundState& bg, double dx, double dt);

/// Runs t_steps frames starting from initial_condition(cfg). Deterministic.
Dataset run(const SolverConfig& cfg);

/// Sum of p'^2 + rho_c^2 (ux'^2 + uy'^2) over the grid.
double energy_proxy(const Snapshot& s, const BackgroundState& bg);

}  // namespace pdeshard::euler
