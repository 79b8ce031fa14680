#include "genplan/config.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "genplan/errors.hpp"
#include "json.hpp"

namespace genplan {
namespace {

using nlohmann::json;

// Visits every leaf of the config as (dotted key, field).
template <class V>
void visit(PipelineConfig& c, V&& v) {
  v("seed", c.seed);
  v("workers", c.workers);
  v("plots", c.plots);
  v("paths.dataset", c.paths.dataset);
  v("paths.model", c.paths.model);
  v("paths.cache", c.paths.cache);
  v("paths.output_dir", c.paths.output_dir);
  v("data.n", c.data.n);
  v("data.noise", c.data.noise);
  v("data.samples", c.data.samples);
  v("data.alpha_min", c.data.alpha_min);
  v("data.alpha_max", c.data.alpha_max);
  v("flow.n_layers", c.train.arch.n_layers);
  v("flow.hidden", c.train.arch.hidden);
  v("train.batch_size", c.train.batch_size);
  v("train.learning_rate", c.train.learning_rate);
  v("train.lr_decay", c.train.lr_decay);
  v("train.decay_every", c.train.decay_every);
  v("train.epochs", c.train.epochs);
  v("train.validation_fraction", c.train.validation_fraction);
  v("train.momentum", c.train.momentum);
  v("train.optimizer", c.train.optimizer);
  v("train.grad_clip", c.train.grad_clip);
  v("grid.bins", c.grid_bins);
  v("roi.x_min", c.roi.x_min);
  v("roi.x_max", c.roi.x_max);
  v("roi.y_min", c.roi.y_min);
  v("roi.y_max", c.roi.y_max);
  v("roi.nx", c.roi.nx);
  v("roi.ny", c.roi.ny);
  v("roi.r_atom", c.roi.r_atom);
  v("cache.ds", c.cache.ds);
  v("cache.reconstruct_samples", c.cache.reconstruct_samples);
  v("cache.kappa_max", c.cache.kappa_max);
  v("planner.n_samples", c.planner.n_samples);
  v("planner.max_draw_factor", c.planner.max_draw_factor);
  v("planner.ds", c.planner.ds);
  v("planner.reconstruct_samples", c.planner.reconstruct_samples);
  v("planner.kappa_max", c.planner.kappa_max);
  v("pid.kv", c.pid.kv);
  v("pid.kct", c.pid.kct);
  v("pid.kh", c.pid.kh);
  v("pid.kd", c.pid.kd);
  v("vehicle.psi_max", c.vehicle.psi_max);
  v("vehicle.accel_max", c.vehicle.accel_max);
  v("vehicle.steer_rate_max", c.vehicle.steer_rate_max);
  v("vehicle.wheelbase", c.vehicle.wheelbase);
  v("vehicle.speed_max", c.vehicle.speed_max);
  v("mppi.horizon_s", c.mppi.horizon_s);
  v("mppi.dt", c.mppi.dt);
  v("mppi.n_rollouts", c.mppi.n_rollouts);
  v("mppi.sigma_a", c.mppi.sigma_a);
  v("mppi.sigma_psidot", c.mppi.sigma_psidot);
  v("mppi.beta", c.mppi.beta);
  v("mppi.gamma", c.mppi.gamma);
  v("mppi.penalty", c.mppi.penalty);
  v("mppi.check_ds", c.mppi.check_ds);
  v("scenario.kind", c.scenario.kind);
  v("scenario.duration", c.scenario.duration);
  v("scenario.start_x", c.scenario.start.x);
  v("scenario.start_y", c.scenario.start.y);
  v("scenario.start_heading", c.scenario.start.heading);
  v("scenario.start_speed", c.scenario.start_speed);
  v("scenario.n_trials", c.scenario.n_trials);
  v("scenario.base_seed", c.scenario.base_seed);
  v("scenario.sim_dt", c.scenario.sim_dt);
  v("scenario.genplan_period_ticks", c.scenario.genplan_period_ticks);
  v("scenario.mppi_period_ticks", c.scenario.mppi_period_ticks);
  v("scenario.replay_ds", c.scenario.replay_ds);
  v("random_world.n_obstacles", c.scenario.random.n_obstacles);
  v("random_world.x_min", c.scenario.random.x_min);
  v("random_world.x_max", c.scenario.random.x_max);
  v("random_world.y_min", c.scenario.random.y_min);
  v("random_world.y_max", c.scenario.random.y_max);
  v("random_world.radius", c.scenario.random.radius);
  v("culdesac.mouth_x", c.scenario.culdesac.mouth_x);
  v("culdesac.rear_x", c.scenario.culdesac.rear_x);
  v("culdesac.half_width", c.scenario.culdesac.half_width);
  v("culdesac.radius", c.scenario.culdesac.radius);
  v("culdesac.spacing", c.scenario.culdesac.spacing);
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p = "/" + dotted;
  for (auto& ch : p) {
    if (ch == '.') ch = '/';
  }
  return json::json_pointer(p);
}

json to_value(const std::string& v) { return v; }
json to_value(double v) { return v; }
json to_value(int v) { return v; }
json to_value(unsigned v) { return v; }
json to_value(std::uint64_t v) { return v; }
json to_value(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "sgd_momentum"; }
json to_value(ScenarioKind k) { return to_string(k); }

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ConfigError("config key " + key + ": expected " + want);
}

void from_value(const json& j, const std::string& key, std::string& out) {
  if (!j.is_string()) bad_type(key, "a string");
  out = j.get<std::string>();
}
void from_value(const json& j, const std::string& key, double& out) {
  if (!j.is_number()) bad_type(key, "a number");
  out = j.get<double>();
  if (!std::isfinite(out)) bad_type(key, "a finite number");
}
template <class Int>
void from_integer(const json& j, const std::string& key, Int& out) {
  if (j.is_number_unsigned()) {
    out = static_cast<Int>(j.get<std::uint64_t>());
    if (static_cast<std::uint64_t>(out) != j.get<std::uint64_t>()) bad_type(key, "an integer in range");
  } else if (j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (std::is_unsigned_v<Int> && v < 0) bad_type(key, "a non-negative integer");
    out = static_cast<Int>(v);
  } else {
    bad_type(key, "an integer");
  }
}
void from_value(const json& j, const std::string& key, int& out) { from_integer(j, key, out); }
void from_value(const json& j, const std::string& key, unsigned& out) { from_integer(j, key, out); }
void from_value(const json& j, const std::string& key, std::uint64_t& out) { from_integer(j, key, out); }
void from_value(const json& j, const std::string& key, Optimizer& out) {
  if (!j.is_string()) bad_type(key, "\"sgd_momentum\" or \"adam\"");
  const auto s = j.get<std::string>();
  if (s == "adam") {
    out = Optimizer::kAdam;
  } else if (s == "sgd_momentum") {
    out = Optimizer::kSgdMomentum;
  } else {
    bad_type(key, "\"sgd_momentum\" or \"adam\"");
  }
}
void from_value(const json& j, const std::string& key, ScenarioKind& out) {
  if (!j.is_string()) bad_type(key, "\"random\" or \"culdesac\"");
  try {
    out = parse_scenario_kind(j.get<std::string>());
  } catch (const ConfigError&) {
    bad_type(key, "\"random\" or \"culdesac\"");
  }
}

void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  if (!j.is_object()) {
    out.push_back(prefix);
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    collect_leaves(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  }
}

json to_json(const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  json j = json::object();
  visit(c, [&](const std::string& key, auto& field) { j[pointer(key)] = to_value(field); });
  return j;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace

void PipelineConfig::finalize() {
  mppi.limits = vehicle;
  train.seed = seed;
  cache.workers = workers;
  require(data.n >= 1 && data.samples >= 8 && data.noise >= 0.0, "data");
  require(data.alpha_min > 0.0 && data.alpha_max > data.alpha_min, "data.alpha_min/alpha_max");
  require(train.arch.n_layers >= 1 && train.arch.hidden >= 1 && train.arch.hidden <= kMaxHidden, "flow");
  require(train.batch_size >= 1 && train.epochs >= 0 && train.learning_rate > 0.0 && train.decay_every >= 1, "train");
  require(train.validation_fraction > 0.0 && train.validation_fraction < 1.0, "train.validation_fraction");
  require(grid_bins >= 1, "grid.bins");
  require(roi.x_max > roi.x_min && roi.y_max > roi.y_min && roi.nx >= 1 && roi.ny >= 1 && roi.r_atom > 0.0, "roi");
  require(cache.ds > 0.0 && cache.reconstruct_samples >= 2 && cache.kappa_max > 0.0, "cache");
  require(planner.n_samples >= 1 && planner.max_draw_factor >= 1.0 && planner.ds > 0.0 &&
              planner.reconstruct_samples >= 2 && planner.kappa_max > 0.0,
          "planner");
  require(vehicle.psi_max > 0.0 && vehicle.accel_max > 0.0 && vehicle.steer_rate_max > 0.0 && vehicle.wheelbase > 0.0 &&
              vehicle.speed_max > 0.0,
          "vehicle");
  require(mppi.horizon_s > 0.0 && mppi.dt > 0.0 && mppi.n_rollouts >= 1 && mppi.sigma_a >= 0.0 &&
              mppi.sigma_psidot >= 0.0 && mppi.beta >= 0.0 && mppi.beta <= 1.0 && mppi.gamma >= 0.0 &&
              mppi.check_ds > 0.0 && mppi.steps() >= 1,
          "mppi");
  require(scenario.duration > 0.0 && scenario.sim_dt > 0.0 && scenario.start_speed >= 0.0 &&
              scenario.genplan_period_ticks >= 1 && scenario.mppi_period_ticks >= 1 && scenario.replay_ds > 0.0,
          "scenario");
}

PipelineConfig parse_config(const std::string& text) {
  json j;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  PipelineConfig cfg;
  std::set<std::string> known;
  visit(cfg, [&](const std::string& key, auto&) { known.insert(key); });
  std::vector<std::string> leaves;
  collect_leaves(j, "", leaves);
  for (const auto& key : leaves) {
    if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
  }
  visit(cfg, [&](const std::string& key, auto& field) {
    const auto ptr = pointer(key);
    if (j.contains(ptr)) from_value(j.at(ptr), key, field);
  });
  cfg.finalize();
  return cfg;
}

PipelineConfig load_config(const std::string& path) { return parse_config(read_file_text(path)); }

std::string dump_config(const PipelineConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

Digest config_hash(const PipelineConfig& cfg) {
  json j = to_json(cfg);
  j.erase("paths");
  j.erase("workers");
  return sha256(j.dump());
}

}  // namespace genplan
