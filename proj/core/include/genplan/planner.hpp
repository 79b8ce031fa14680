#pragma once

#include <cstddef>
#include <vector>

#include "genplan/arc_primitives.hpp"
#include "genplan/flow_model.hpp"
#include "genplan/mask_cache.hpp"
#include "genplan/rng.hpp"
#include "genplan/vehicle.hpp"
#include "genplan/world.hpp"

namespace genplan {

struct PlanConfig {
  std::size_t n_samples = 512;
  double max_draw_factor = 16.0;
  double ds = kDefaultCheckSpacing;
  std::size_t reconstruct_samples = kReconstructSamples;
  double kappa_max = kDefaultKappaMax;
  // Keep every drawn sample (including masked ones, decoded for display).
  bool record_samples = false;
};

struct PlanStats {
  std::size_t draws = 0;       // prior draws made
  std::size_t rejects = 0;     // draws landing in a rejected cell
  std::size_t accepted = 0;
  std::size_t flow_evals = 0;  // samples pushed through the flow
  std::size_t checks = 0;      // explicit collision checks
  std::size_t rank = 0;        // 1-based cost rank of the chosen sample; 0 on fallback
  std::size_t rejected_cells = 0;
  std::size_t atomic_maps = 0;
  bool fallback = false;
};

struct SampleRecord {
  PosePath world_path;
  double cost = 0.0;
  bool masked = false;
};

struct PlanResult {
  PrimitiveParams theta;
  Pose2 origin;          // vehicle pose the plan is anchored at
  PosePath body_path;    // reconstruction in the vehicle frame
  PosePath world_path;
  double cost = 0.0;
  PlanStats stats;
  std::vector<double> accepted_costs;  // every accepted sample, draw order
  std::vector<SampleRecord> samples;   // only with record_samples
};

// Cost of a world-frame path: the negative terminal x.
double path_cost(const PosePath& world_path);

// Maximum-deceleration straight primitive:
// alpha = max(v T - A_max T^2 / 2, v T / 4), floored at kMinPrimitiveAlpha.
PrimitiveParams fallback_params(const VehicleState& state, const VehicleLimits& limits = {});
PosePath fallback(const VehicleState& state, const VehicleLimits& limits = {},
                  std::size_t n_samples = kReconstructSamples);

// One GenPlan iteration: decompose the map into atomic obstacles, OR their
// masks, draw prior samples outside rejected cells, decode them, rank by
// cost and explicitly check the cheapest ones against the full world until
// one is collision free. Throws ConfigError if the cache does not belong to
// the model.
PlanResult plan(const VehicleState& state, const World& world, const FlowModel& model, const MaskCache& cache,
                const InputGrid& igrid, const PlanConfig& cfg, Rng& rng, const VehicleLimits& limits = {});

}  // namespace genplan
