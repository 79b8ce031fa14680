#pragma once

#include <cstdint>
#include <string>

#include "genplan/experiments.hpp"
#include "genplan/flow_train.hpp"
#include "genplan/io.hpp"
#include "genplan/mask_cache.hpp"
#include "genplan/mppi.hpp"
#include "genplan/planner.hpp"
#include "genplan/vehicle.hpp"

namespace genplan {

struct PathsConfig {
  std::string dataset = "data/expert.csv";
  std::string model = "data/flow.gpnf";
  std::string cache = "data/mask.gpmc";
  std::string output_dir = "out";
};

// Everything the CLI needs. Loaded from a JSON object whose sections mirror
// the members below; absent keys keep their defaults and unknown keys are
// rejected. `vehicle` limits are shared by the simulator, PID and MPPI.
struct PipelineConfig {
  std::uint64_t seed = 1;
  unsigned workers = 0;  // 0: hardware concurrency; never affects results
  PathsConfig paths;
  ExpertConfig data;
  TrainConfig train;
  int grid_bins = 12;
  AtomicGrid roi;
  CacheBuildOptions cache;
  PlanConfig planner;
  PidGains pid;
  VehicleLimits vehicle;
  MppiConfig mppi;
  ScenarioConfig scenario;
  std::size_t plots = 3;  // rollout SVGs written by bench for its first trials

  // Applies cross-section rules (shared limits, seeds) and range checks.
  void finalize();
};

PipelineConfig parse_config(const std::string& json_text);
// Missing file raises ConfigError naming the path; an empty file yields defaults.
PipelineConfig load_config(const std::string& path);
// Fully resolved config as pretty-printed JSON; parse_config of it is a fixed point.
std::string dump_config(const PipelineConfig& cfg);
// SHA-256 over the resolved config minus `paths` and `workers`.
Digest config_hash(const PipelineConfig& cfg);

}  // namespace genplan
