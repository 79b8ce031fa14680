#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "genplan/rng.hpp"
#include "genplan/vehicle.hpp"
#include "genplan/world.hpp"

namespace genplan {

struct MppiConfig {
  double horizon_s = 2.0;
  double dt = 0.02;  // rollout discretization and control period
  std::size_t n_rollouts = 1024;
  double sigma_a = 2.0;                                // m/s^2
  double sigma_psidot = 16.0 * std::numbers::pi / 5.0;  // rad/s
  double beta = 0.25;   // noise correlation factor
  double gamma = 1.0;   // exponential reward weighting
  double penalty = 1e3;  // per colliding rollout step
  double check_ds = 0.05;  // spacing of the per-step collision test
  VehicleLimits limits;

  std::size_t steps() const { return static_cast<std::size_t>(std::lround(horizon_s / dt)); }
};

// Nominal control sequence carried between iterations.
struct MppiState {
  std::vector<ControlInput> nominal;

  static MppiState zeros(const MppiConfig& cfg) { return {std::vector<ControlInput>(cfg.steps())}; }
};

// AR(1)-smoothed Gaussian noise for one rollout:
// eps_0 = d_0, eps_t = beta * d_t + (1 - beta) * eps_{t-1}, d_t ~ N(0, diag(sigma^2)).
std::vector<ControlInput> correlated_noise(const MppiConfig& cfg, Rng& rng);

// Euler rollout; returns the H + 1 states including the start.
std::vector<VehicleState> mppi_rollout(const VehicleState& start, std::span<const ControlInput> controls,
                                       const MppiConfig& cfg);

// Terminal x minus penalty times the number of steps whose segment
// (checked at `check_ds`) hits an obstacle.
double mppi_rollout_reward(std::span<const VehicleState> states, const World& world, double penalty,
                           double check_ds = 0.05);

// Optional per-iteration internals for tests and plots.
struct MppiDiagnostics {
  std::vector<double> rewards;
  std::vector<double> weights;
  std::vector<std::vector<ControlInput>> candidates;
  std::vector<VehicleState> nominal_rollout;  // rollout of the updated nominal
};

struct MppiStepResult {
  ControlInput control;  // first entry of the updated nominal
  MppiState next;        // updated nominal shifted left by one step
};

// One MPPI iteration. Rollouts are evaluated sequentially in index order and
// reduced in that order, so results are reproducible for a fixed rng state.
MppiStepResult mppi_step(const VehicleState& state, const World& world, const MppiState& ms, const MppiConfig& cfg,
                         Rng& rng, MppiDiagnostics* diag = nullptr);

}  // namespace genplan
