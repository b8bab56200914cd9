#include "pdeshard/euler.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pdeshard/error.hpp"

namespace pdeshard {

void SolverConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("SolverConfig: " + what); };
  if (n < 8) fail("n must be >= 8");
  if (t_steps < 1) fail("t_steps must be >= 1");
  if (!(extent > 0)) fail("extent must be > 0");
  if (!(gamma > 1)) fail("gamma must be > 1");
  if (!(rho_c > 0)) fail("rho_c must be > 0");
  if (!(p_c > 0)) fail("p_c must be > 0");
  if (!(cfl > 0 && cfl < 1)) fail("cfl must be in (0, 1)");
  if (!(pulse_hw > 0)) fail("pulse_hw must be > 0");
}

double SolverConfig::sound_speed() const noexcept { return std::sqrt(gamma * p_c / rho_c); }

double SolverConfig::dt() const noexcept {
  return cfl * dx() / (std::hypot(uc_x, uc_y) + sound_speed());
}

namespace euler {

BackgroundState BackgroundState::from(const SolverConfig& cfg) {
  return {cfg.rho_c, cfg.p_c, cfg.uc_x, cfg.uc_y, cfg.gamma};
}

double BackgroundState::sound_speed() const noexcept { return std::sqrt(gamma * p_c / rho_c); }

double BackgroundState::max_wave_speed() const noexcept { return std::hypot(uc_x, uc_y) + sound_speed(); }

double cell_center(int i, const SolverConfig& cfg) noexcept { return -cfg.extent + (i + 0.5) * cfg.dx(); }

Snapshot initial_condition(const SolverConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(cfg.n);
  Tensor3 q(kNumChannels, n, n);
  const double inv_hw2 = 1.0 / (cfg.pulse_hw * cfg.pulse_hw);
  for (int r = 0; r < n; ++r) {
    const double y = cell_center(r, cfg) - cfg.pulse_cy;
    for (int c = 0; c < n; ++c) {
      const double x = cell_center(c, cfg) - cfg.pulse_cx;
      q(kP, r, c) = cfg.pulse_amp * std::exp(-std::numbers::ln2 * (x * x + y * y) * inv_hw2);
    }
  }
  return Snapshot(std::move(q));
}

namespace {

using State = std::array<double, kNumChannels>;

// Physical fluxes of the linear system along x and y.
State flux_x(const State& q, const BackgroundState& bg) {
  return {bg.uc_x * q[kRho] + bg.rho_c * q[kUx], bg.uc_x * q[kUx] + q[kP] / bg.rho_c, bg.uc_x * q[kUy],
          bg.uc_x * q[kP] + bg.gamma * bg.p_c * q[kUx]};
}

State flux_y(const State& q, const BackgroundState& bg) {
  return {bg.uc_y * q[kRho] + bg.rho_c * q[kUy], bg.uc_y * q[kUx], bg.uc_y * q[kUy] + q[kP] / bg.rho_c,
          bg.uc_y * q[kP] + bg.gamma * bg.p_c * q[kUy]};
}

State rusanov(const State& l, const State& r, const State& fl, const State& fr, double a) {
  State f;
  for (int k = 0; k < kNumChannels; ++k) f[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * a * (r[k] - l[k]);
  return f;
}

// Outflow ghost: zero pressure, zero-gradient for the rest.
State ghost_of(const State& interior) { return {interior[kRho], interior[kUx], interior[kUy], 0.0}; }

}  // namespace

Snapshot step(const Snapshot& s, const BackgroundState& bg, double dx, double dt) {
  const double c = bg.sound_speed();
  const double ax = std::abs(bg.uc_x) + c;
  const double ay = std::abs(bg.uc_y) + c;
  const double courant = dt * (ax + ay) / dx;
  if (!(dt > 0) || !(courant <= kStabilityLimit)) {
    std::ostringstream msg;
    msg << "step: dt=" << dt << " gives Courant sum " << courant << " > " << kStabilityLimit;
    throw CflError(msg.str());
  }

  const int h = s.h();
  const int w = s.w();
  const Tensor3& q = s.tensor();
  auto at = [&](int r, int col) -> State {
    return {q(kRho, r, col), q(kUx, r, col), q(kUy, r, col), q(kP, r, col)};
  };

  // x-face fluxes: w+1 faces per row; y-face fluxes: h+1 faces per column.
  std::vector<State> fx(static_cast<std::size_t>(h) * (w + 1));
  std::vector<State> fy(static_cast<std::size_t>(h + 1) * w);
  for (int r = 0; r < h; ++r) {
    for (int f = 0; f <= w; ++f) {
      const State l = f > 0 ? at(r, f - 1) : ghost_of(at(r, 0));
      const State rt = f < w ? at(r, f) : ghost_of(at(r, w - 1));
      fx[static_cast<std::size_t>(r) * (w + 1) + f] = rusanov(l, rt, flux_x(l, bg), flux_x(rt, bg), ax);
    }
  }
  for (int f = 0; f <= h; ++f) {
    for (int col = 0; col < w; ++col) {
      const State lo = f > 0 ? at(f - 1, col) : ghost_of(at(0, col));
      const State hi = f < h ? at(f, col) : ghost_of(at(h - 1, col));
      fy[static_cast<std::size_t>(f) * w + col] = rusanov(lo, hi, flux_y(lo, bg), flux_y(hi, bg), ay);
    }
  }

  const double lambda = dt / dx;
  Tensor3 next(kNumChannels, h, w);
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      const State& xl = fx[static_cast<std::size_t>(r) * (w + 1) + col];
      const State& xr = fx[static_cast<std::size_t>(r) * (w + 1) + col + 1];
      const State& yl = fy[static_cast<std::size_t>(r) * w + col];
      const State& yr = fy[static_cast<std::size_t>(r + 1) * w + col];
      for (int k = 0; k < kNumChannels; ++k)
        next(k, r, col) = q(k, r, col) - lambda * ((xr[k] - xl[k]) + (yr[k] - yl[k]));
    }
  }
  if (!next.all_finite()) throw NumericError("step: non-finite value in updated state");
  return Snapshot(std::move(next));
}

Dataset run(const SolverConfig& cfg) {
  cfg.validate();
  const auto bg = BackgroundState::from(cfg);
  const double dx = cfg.dx();
  const double dt = cfg.dt();
  Dataset d;
  d.dt = dt;
  d.meta = cfg;
  d.frames.reserve(cfg.t_steps);
  d.frames.push_back(initial_condition(cfg));
  for (std::uint32_t t = 1; t < cfg.t_steps; ++t) d.frames.push_back(step(d.frames.back(), bg, dx, dt));
  return d;
}

double energy_proxy(const Snapshot& s, const BackgroundState& bg) {
  const Tensor3& q = s.tensor();
  double e = 0.0;
  const double r2 = bg.rho_c * bg.rho_c;
  for (std::size_t i = 0; i < q.plane_size(); ++i) {
    const double u = q.plane(kUx)[i];
    const double v = q.plane(kUy)[i];
    const double p = q.plane(kP)[i];
    e += p * p + r2 * (u * u + v * v);
  }
  return e;
}

}  // namespace euler
}  // namespace pdeshard
