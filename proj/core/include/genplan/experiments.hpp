#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "genplan/arc_primitives.hpp"
#include "genplan/flow_model.hpp"
#include "genplan/mask_cache.hpp"
#include "genplan/mppi.hpp"
#include "genplan/planner.hpp"
#include "genplan/rng.hpp"
#include "genplan/vehicle.hpp"
#include "genplan/world.hpp"

namespace genplan {

enum class ScenarioKind { kRandom, kCuldesac };
enum class ControllerKind { kGenPlan, kMppi };

std::string to_string(ScenarioKind kind);
std::string to_string(ControllerKind kind);
ScenarioKind parse_scenario_kind(const std::string& s);
ControllerKind parse_controller_kind(const std::string& s);

struct RandomWorldConfig {
  int n_obstacles = 50;
  double x_min = 0.0;
  double x_max = 5.0;
  double y_min = -3.0;
  double y_max = 3.0;
  double radius = 0.15;
};

// U-shaped trap opening towards -x. Side walls run along y = +-half_width
// from mouth_x to rear_x; the rear wall runs along x = rear_x. Obstacle
// centres are evenly spaced at most `spacing` apart and corners are shared.
struct CuldesacConfig {
  double mouth_x = 2.5;
  double rear_x = 4.6;
  double half_width = 1.25;
  double radius = 0.15;
  double spacing = 0.15;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::kRandom;
  double duration = 2.5;
  Pose2 start{-0.5, 0.0, 0.0};
  double start_speed = 2.5;
  std::size_t n_trials = 100;
  std::uint64_t base_seed = 1;
  double sim_dt = 0.01;
  int genplan_period_ticks = 20;  // 5 Hz at the default sim rate
  int mppi_period_ticks = 2;      // 50 Hz, zero-order hold in between
  double replay_ds = 0.005;       // collision check spacing along executed motion
  RandomWorldConfig random;
  CuldesacConfig culdesac;
};

// Uniform obstacle centres; any obstacle containing `start` is redrawn.
World gen_random_world(const RandomWorldConfig& cfg, Point2 start, Rng& rng);
World gen_culdesac(const CuldesacConfig& cfg);
// World of trial `seed` for the configured scenario.
World scenario_world(const ScenarioConfig& cfg, std::uint64_t seed);

struct ExpertConfig {
  std::size_t n = 836;
  double noise = 0.005;  // position noise stddev, m
  std::size_t samples = 64;
  double alpha_min = 1.5;
  double alpha_max = 6.0;
};

// Maneuver families of the synthetic expert.
enum class Maneuver {
  kCruise,
  kSwerveLeft,
  kSwerveRight,
  kLaneLeft,
  kLaneRight,
  kAvoidLeft,
  kAvoidRight,
  kBrake,
  kBrakeLeft,
  kBrakeRight,
};
inline constexpr int kManeuverCount = 10;

struct ExpertSample {
  Maneuver maneuver;
  PrimitiveParams generated;
  PrimitiveParams fitted;
};

// Draws a generating primitive of the given family.
PrimitiveParams sample_maneuver(Maneuver m, const ExpertConfig& cfg, Rng& rng);
std::vector<ExpertSample> synth_expert_detailed(Rng& rng, const ExpertConfig& cfg = {});
// Reconstruct, perturb and refit each generated primitive; returns the fits.
std::vector<PrimitiveParams> synth_expert(Rng& rng, const ExpertConfig& cfg = {});

struct GenPlanSetup {
  const FlowModel* model = nullptr;
  const MaskCache* cache = nullptr;
  const InputGrid* igrid = nullptr;
  PlanConfig plan;
  PidGains pid;
};

struct ControllerSetup {
  ControllerKind kind = ControllerKind::kGenPlan;
  GenPlanSetup genplan;
  MppiConfig mppi;
  VehicleLimits limits;
};

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  bool collided = false;
  bool exited = false;
  double terminal_x = 0.0;
  double avg_vel = 0.0;  // path length / elapsed time
  double path_length = 0.0;
  double elapsed = 0.0;
  std::size_t plans = 0;
  std::size_t fallbacks = 0;
  double mean_rank = 0.0;  // over non-fallback plans

  friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

struct EpisodeTrace {
  std::vector<double> times;
  std::vector<VehicleState> states;
  std::vector<PosePath> plans;  // world-frame plans at 5 Hz
  std::vector<PlanStats> plan_stats;  // GenPlan only, with the tick and chosen cost of each plan
  std::vector<std::size_t> plan_ticks;
  std::vector<double> plan_costs;
};

// Executed trajectory as a path, for replaying collisions.
PosePath trace_path(const EpisodeTrace& trace);

EpisodeMetrics run_episode(const ControllerSetup& ctl, const World& world, const ScenarioConfig& scenario,
                           std::uint64_t seed, EpisodeTrace* trace = nullptr);

struct Summary {
  std::size_t n_trials = 0;
  std::size_t n_free = 0;  // non-colliding trials
  double exit_pct = 0.0;
  double collision_pct = 0.0;
  // Over non-colliding trials; std is the sample standard deviation, 0 for fewer than two.
  double terminal_x_mean = 0.0;
  double terminal_x_std = 0.0;
  double avg_vel_mean = 0.0;
  double avg_vel_std = 0.0;
  double mean_rank = 0.0;
  std::size_t fallbacks = 0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

Summary summarize(const std::vector<EpisodeMetrics>& trials);

struct BenchmarkResult {
  std::vector<EpisodeMetrics> trials;
  Summary summary;
};

// Trials base_seed .. base_seed + n_trials - 1, run on `workers` threads.
BenchmarkResult benchmark(const ControllerSetup& ctl, const ScenarioConfig& scenario, unsigned workers = 0);

void write_trials_csv(std::ostream& out, const std::vector<EpisodeMetrics>& trials, const std::string& comment = {});
std::vector<EpisodeMetrics> read_trials_csv(std::istream& in);

struct SummaryRow {
  std::string label;
  Summary summary;
};
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, const std::string& comment = {});

// The eleven (sigma_a, sigma_psidot) pairs (a, 1.6 pi a), a = 0.1, 0.5, 1.0, ..., 5.0.
std::vector<std::pair<double, double>> sweep_sigmas();

struct SweepRow {
  double sigma_a = 0.0;
  double sigma_psidot = 0.0;
  BenchmarkResult result;
};

std::vector<SweepRow> mppi_sigma_sweep(const ControllerSetup& mppi_ctl, const ScenarioConfig& scenario,
                                       unsigned workers = 0);

}  // namespace genplan
