#include "genplan/mppi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "genplan/errors.hpp"

namespace genplan {

std::vector<ControlInput> correlated_noise(const MppiConfig& cfg, Rng& rng) {
  const std::size_t H = cfg.steps();
  std::vector<ControlInput> eps(H);
  for (std::size_t t = 0; t < H; ++t) {
    const ControlInput d{cfg.sigma_a * standard_normal(rng), cfg.sigma_psidot * standard_normal(rng)};
    if (t == 0) {
      eps[t] = d;
    } else {
      eps[t].accel = cfg.beta * d.accel + (1.0 - cfg.beta) * eps[t - 1].accel;
      eps[t].steer_rate = cfg.beta * d.steer_rate + (1.0 - cfg.beta) * eps[t - 1].steer_rate;
    }
  }
  return eps;
}

std::vector<VehicleState> mppi_rollout(const VehicleState& start, std::span<const ControlInput> controls,
                                       const MppiConfig& cfg) {
  std::vector<VehicleState> states;
  states.reserve(controls.size() + 1);
  states.push_back(start);
  for (const auto& u : controls) states.push_back(euler_step(states.back(), u, cfg.dt, cfg.limits));
  return states;
}

double mppi_rollout_reward(std::span<const VehicleState> states, const World& world, double penalty,
                           double check_ds) {
  if (states.empty()) throw ParameterError("mppi_rollout_reward: empty rollout");
  std::size_t hits = 0;
  if (!world.empty()) {
    for (std::size_t i = 1; i < states.size(); ++i) {
      if (segment_collides({states[i - 1].x, states[i - 1].y}, {states[i].x, states[i].y}, world, check_ds)) ++hits;
    }
  }
  return states.back().x - penalty * static_cast<double>(hits);
}

MppiStepResult mppi_step(const VehicleState& state, const World& world, const MppiState& ms, const MppiConfig& cfg,
                         Rng& rng, MppiDiagnostics* diag) {
  const std::size_t H = cfg.steps();
  const std::size_t N = cfg.n_rollouts;
  if (H == 0 || N == 0) throw ConfigError("mppi: horizon and rollout count must be positive");
  if (ms.nominal.size() != H) throw ParameterError("mppi: nominal sequence length does not match the horizon");

  std::vector<ControlInput> candidates(N * H);
  std::vector<double> rewards(N);
  std::vector<VehicleState> states(H + 1);
  for (std::size_t k = 0; k < N; ++k) {
    ControlInput* cand = candidates.data() + k * H;
    ControlInput eps;
    states[0] = state;
    for (std::size_t t = 0; t < H; ++t) {
      // Same recursion and draw order as correlated_noise.
      const double da = cfg.sigma_a * standard_normal(rng);
      const double dp = cfg.sigma_psidot * standard_normal(rng);
      eps = t == 0 ? ControlInput{da, dp}
                   : ControlInput{cfg.beta * da + (1.0 - cfg.beta) * eps.accel,
                                  cfg.beta * dp + (1.0 - cfg.beta) * eps.steer_rate};
      cand[t] = clamp_control({ms.nominal[t].accel + eps.accel, ms.nominal[t].steer_rate + eps.steer_rate},
                              cfg.limits);
      states[t + 1] = euler_step(states[t], cand[t], cfg.dt, cfg.limits);
    }
    rewards[k] = mppi_rollout_reward(states, world, cfg.penalty, cfg.check_ds);
  }

  const double best = *std::max_element(rewards.begin(), rewards.end());
  std::vector<double> weights(N);
  double total = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    weights[k] = std::exp(cfg.gamma * (rewards[k] - best));
    total += weights[k];
  }
  for (auto& w : weights) w /= total;

  MppiStepResult out;
  std::vector<ControlInput> updated(H);
  for (std::size_t k = 0; k < N; ++k) {
    const double w = weights[k];
    if (w == 0.0) continue;
    const ControlInput* cand = candidates.data() + k * H;
    for (std::size_t t = 0; t < H; ++t) {
      updated[t].accel += w * cand[t].accel;
      updated[t].steer_rate += w * cand[t].steer_rate;
    }
  }
  out.control = clamp_control(updated.front(), cfg.limits);
  out.next.nominal.assign(updated.begin() + 1, updated.end());
  out.next.nominal.push_back(updated.back());

  if (diag) {
    diag->rewards = rewards;
    diag->weights = weights;
    diag->candidates.assign(N, {});
    for (std::size_t k = 0; k < N; ++k) {
      diag->candidates[k].assign(candidates.begin() + static_cast<std::ptrdiff_t>(k * H),
                                 candidates.begin() + static_cast<std::ptrdiff_t>((k + 1) * H));
    }
    diag->nominal_rollout = mppi_rollout(state, updated, cfg);
  }
  return out;
}

}  // namespace genplan
