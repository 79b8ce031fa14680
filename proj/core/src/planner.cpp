#include "genplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "genplan/errors.hpp"

namespace genplan {

double path_cost(const PosePath& world_path) {
  if (world_path.empty()) throw ParameterError("path_cost: empty path");
  return -world_path.back().x;
}

PrimitiveParams fallback_params(const VehicleState& state, const VehicleLimits& limits) {
  const double T = kPrimitiveDuration;
  const double v = std::max(state.v, 0.0);
  const double alpha = std::max({v * T - 0.5 * limits.accel_max * T * T, v * T / 4.0, kMinPrimitiveAlpha});
  return {alpha, 0.0, 0.0, 0.0};
}

PosePath fallback(const VehicleState& state, const VehicleLimits& limits, std::size_t n_samples) {
  return transform_to_world(reconstruct(fallback_params(state, limits), n_samples), state.pose());
}

PlanResult plan(const VehicleState& state, const World& world, const FlowModel& model, const MaskCache& cache,
                const InputGrid& igrid, const PlanConfig& cfg, Rng& rng, const VehicleLimits& limits) {
  cache.require_model(model);
  if (cache.bins() != igrid.bins()) throw ConfigError("planner: cache and input grid disagree on K");
  if (cfg.n_samples == 0 || !(cfg.max_draw_factor >= 1.0) || !(cfg.ds > 0.0)) {
    throw ConfigError("planner: n_samples, max_draw_factor and ds must be positive");
  }

  PlanResult result;
  result.origin = state.pose();
  PlanStats& st = result.stats;

  const auto atomic = decompose(world, result.origin, cache.atomic_grid());
  const BitArray rejected = rejected_cells(cache, atomic);
  st.atomic_maps = atomic.size();
  st.rejected_cells = rejected.popcount();

  const auto max_draws = static_cast<std::size_t>(std::ceil(cfg.max_draw_factor * static_cast<double>(cfg.n_samples)));
  std::vector<Vec4> accepted;
  std::vector<Vec4> masked;
  accepted.reserve(cfg.n_samples);
  while (accepted.size() < cfg.n_samples && st.draws < max_draws) {
    Vec4 z;
    for (auto& c : z) c = standard_normal(rng);
    ++st.draws;
    if (rejected.test(igrid.cell_of(z))) {
      ++st.rejects;
      if (cfg.record_samples) masked.push_back(z);
      continue;
    }
    accepted.push_back(z);
  }
  st.accepted = accepted.size();

  std::vector<Vec4> decoded(accepted.size());
  model.forward_batch(accepted, decoded);
  st.flow_evals = accepted.size();

  std::vector<PrimitiveParams> thetas(accepted.size());
  std::vector<PosePath> body_paths(accepted.size());
  std::vector<PosePath> world_paths(accepted.size());
  std::vector<double> costs(accepted.size());
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    thetas[i] = to_primitive(decoded[i], cfg.kappa_max);
    body_paths[i] = reconstruct(thetas[i], cfg.reconstruct_samples);
    world_paths[i] = transform_to_world(body_paths[i], result.origin);
    costs[i] = path_cost(world_paths[i]);
  }
  result.accepted_costs = costs;

  std::vector<std::size_t> order(accepted.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });

  std::size_t chosen = order.size();
  for (std::size_t r = 0; r < order.size(); ++r) {
    ++st.checks;
    if (!path_collides(world_paths[order[r]], world, cfg.ds)) {
      chosen = order[r];
      st.rank = r + 1;
      break;
    }
  }

  if (chosen < order.size()) {
    result.theta = thetas[chosen];
    result.body_path = body_paths[chosen];
    result.world_path = world_paths[chosen];
    result.cost = costs[chosen];
  } else {
    st.fallback = true;
    st.rank = 0;
    result.theta = fallback_params(state, limits);
    result.body_path = reconstruct(result.theta, cfg.reconstruct_samples);
    result.world_path = transform_to_world(result.body_path, result.origin);
    result.cost = path_cost(result.world_path);
  }

  if (cfg.record_samples) {
    result.samples.reserve(accepted.size() + masked.size());
    for (std::size_t i = 0; i < accepted.size(); ++i) {
      result.samples.push_back({world_paths[i], costs[i], false});
    }
    std::vector<Vec4> masked_theta(masked.size());
    model.forward_batch(masked, masked_theta);
    for (const auto& t : masked_theta) {
      PosePath wp = transform_to_world(reconstruct(to_primitive(t, cfg.kappa_max), cfg.reconstruct_samples), result.origin);
      const double c = path_cost(wp);
      result.samples.push_back({std::move(wp), c, true});
    }
  }
  return result;
}

}  // namespace genplan
