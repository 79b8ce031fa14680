#include "genplan/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "genplan/errors.hpp"
#include "genplan/io.hpp"
#include "genplan/parallel.hpp"

namespace genplan {

std::string to_string(ScenarioKind kind) { return kind == ScenarioKind::kRandom ? "random" : "culdesac"; }
std::string to_string(ControllerKind kind) { return kind == ControllerKind::kGenPlan ? "genplan" : "mppi"; }

ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "random") return ScenarioKind::kRandom;
  if (s == "culdesac") return ScenarioKind::kCuldesac;
  throw ConfigError("unknown scenario kind: " + s);
}

ControllerKind parse_controller_kind(const std::string& s) {
  if (s == "genplan") return ControllerKind::kGenPlan;
  if (s == "mppi") return ControllerKind::kMppi;
  throw ConfigError("unknown controller kind: " + s);
}

World gen_random_world(const RandomWorldConfig& cfg, Point2 start, Rng& rng) {
  if (cfg.n_obstacles < 0 || cfg.radius <= 0.0 || !(cfg.x_max > cfg.x_min) || !(cfg.y_max > cfg.y_min)) {
    throw ConfigError("random world: invalid bounds or radius");
  }
  std::vector<Obstacle> obs;
  obs.reserve(static_cast<std::size_t>(cfg.n_obstacles));
  for (int i = 0; i < cfg.n_obstacles; ++i) {
    Obstacle o{0.0, 0.0, cfg.radius};
    do {
      o.cx = uniform(rng, cfg.x_min, cfg.x_max);
      o.cy = uniform(rng, cfg.y_min, cfg.y_max);
    } while (point_in_disc(start.x, start.y, o.cx, o.cy, o.r));
    obs.push_back(o);
  }
  return World(std::move(obs));
}

namespace {

// Points from a to b inclusive, spaced at most `spacing` apart.
void wall(std::vector<Obstacle>& out, Point2 a, Point2 b, double spacing, double r, bool include_last) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(len / spacing - 1e-9)));
  const std::size_t last = include_last ? m : m - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(m);
    out.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), r});
  }
}

}  // namespace

World gen_culdesac(const CuldesacConfig& cfg) {
  if (!(cfg.rear_x > cfg.mouth_x) || cfg.half_width <= 0.0 || cfg.radius <= 0.0 || cfg.spacing <= 0.0) {
    throw ConfigError("culdesac: invalid geometry");
  }
  const double w = cfg.half_width;
  std::vector<Obstacle> obs;
  wall(obs, {cfg.rear_x, -w}, {cfg.rear_x, w}, cfg.spacing, cfg.radius, true);
  wall(obs, {cfg.mouth_x, w}, {cfg.rear_x, w}, cfg.spacing, cfg.radius, false);
  wall(obs, {cfg.mouth_x, -w}, {cfg.rear_x, -w}, cfg.spacing, cfg.radius, false);
  return World(std::move(obs));
}

World scenario_world(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == ScenarioKind::kCuldesac) return gen_culdesac(cfg.culdesac);
  Rng rng = make_rng(seed, Stream::kWorld);
  return gen_random_world(cfg.random, {cfg.start.x, cfg.start.y}, rng);
}

PrimitiveParams sample_maneuver(Maneuver m, const ExpertConfig& cfg, Rng& rng) {
  auto u = [&](double lo, double hi) { return uniform(rng, lo, hi); };
  auto clip = [&](double a) { return std::clamp(a, cfg.alpha_min, cfg.alpha_max); };
  PrimitiveParams p;
  double sign = 1.0;
  switch (m) {
    case Maneuver::kCruise:
      p.alpha = clip(u(3.5, 6.0));
      p.kappa1 = 0.03 * standard_normal(rng);
      p.kappa2 = 0.03 * standard_normal(rng);
      p.kappa3 = 0.03 * standard_normal(rng);
      return p;
    case Maneuver::kSwerveRight:
      sign = -1.0;
      [[fallthrough]];
    case Maneuver::kSwerveLeft:
      p.alpha = clip(u(3.0, 5.5));
      p.kappa1 = sign * u(0.15, 0.35);
      p.kappa2 = sign * u(0.05, 0.2);
      p.kappa3 = sign * u(-0.1, 0.1);
      return p;
    case Maneuver::kLaneRight:
      sign = -1.0;
      [[fallthrough]];
    case Maneuver::kLaneLeft:
      p.alpha = clip(u(3.0, 5.5));
      p.kappa1 = sign * u(0.2, 0.4);
      p.kappa2 = sign * u(-0.1, 0.1);
      p.kappa3 = -sign * u(0.2, 0.4);
      return p;
    case Maneuver::kAvoidRight:
      sign = -1.0;
      [[fallthrough]];
    case Maneuver::kAvoidLeft:
      p.alpha = clip(u(1.5, 3.5));
      p.kappa1 = sign * u(0.35, 0.45);
      p.kappa2 = sign * u(0.3, 0.45);
      p.kappa3 = sign * u(0.1, 0.3);
      return p;
    case Maneuver::kBrake:
      p.alpha = clip(u(1.5, 2.5));
      p.kappa1 = 0.05 * standard_normal(rng);
      p.kappa2 = 0.05 * standard_normal(rng);
      p.kappa3 = 0.05 * standard_normal(rng);
      return p;
    case Maneuver::kBrakeRight:
      sign = -1.0;
      [[fallthrough]];
    case Maneuver::kBrakeLeft:
      p.alpha = clip(u(1.5, 2.5));
      p.kappa1 = sign * u(0.2, 0.45);
      p.kappa2 = sign * u(0.0, 0.45);
      p.kappa3 = sign * u(-0.2, 0.3);
      return p;
  }
  throw ParameterError("unknown maneuver");
}

namespace {

constexpr std::array<double, kManeuverCount> kManeuverWeights{0.22, 0.09, 0.09, 0.11, 0.11, 0.08, 0.08,
                                                                  0.08, 0.07, 0.07};

Maneuver draw_maneuver(Rng& rng) {
  double r = uniform(rng, 0.0, 1.0);
  for (int i = 0; i < kManeuverCount; ++i) {
    r -= kManeuverWeights[static_cast<std::size_t>(i)];
    if (r < 0.0) return static_cast<Maneuver>(i);
  }
  return static_cast<Maneuver>(kManeuverCount - 1);
}

}  // namespace

std::vector<ExpertSample> synth_expert_detailed(Rng& rng, const ExpertConfig& cfg) {
  if (cfg.samples < 8) throw ConfigError("synth_expert: need at least 8 samples per primitive");
  std::vector<ExpertSample> out;
  out.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    ExpertSample s;
    s.maneuver = draw_maneuver(rng);
    s.generated = sample_maneuver(s.maneuver, cfg, rng);
    PosePath path = reconstruct(s.generated, cfg.samples);
    for (auto& p : path.samples) {
      p.x += cfg.noise * standard_normal(rng);
      p.y += cfg.noise * standard_normal(rng);
    }
    s.fitted = fit_params(path).params;
    out.push_back(s);
  }
  return out;
}

std::vector<PrimitiveParams> synth_expert(Rng& rng, const ExpertConfig& cfg) {
  std::vector<PrimitiveParams> out;
  for (const auto& s : synth_expert_detailed(rng, cfg)) out.push_back(s.fitted);
  return out;
}

PosePath trace_path(const EpisodeTrace& trace) {
  PosePath p;
  p.samples.reserve(trace.states.size());
  for (std::size_t i = 0; i < trace.states.size(); ++i) {
    const auto& s = trace.states[i];
    p.samples.push_back({trace.times[i], s.x, s.y, s.phi});
  }
  return p;
}

EpisodeMetrics run_episode(const ControllerSetup& ctl, const World& world, const ScenarioConfig& sc,
                           std::uint64_t seed, EpisodeTrace* trace) {
  if (sc.sim_dt <= 0.0 || sc.duration <= 0.0) throw ConfigError("scenario: duration and sim_dt must be positive");
  if (sc.genplan_period_ticks < 1 || sc.mppi_period_ticks < 1) throw ConfigError("scenario: periods must be >= 1");
  const bool use_genplan = ctl.kind == ControllerKind::kGenPlan;
  if (use_genplan && (!ctl.genplan.model || !ctl.genplan.cache || !ctl.genplan.igrid)) {
    throw ConfigError("genplan controller needs a model, a mask cache and an input grid");
  }

  Rng planner_rng = make_rng(seed, Stream::kPlanner);
  Rng mppi_rng = make_rng(seed, Stream::kMppi);
  MppiState mppi_state = MppiState::zeros(ctl.mppi);

  VehicleState state{sc.start.x, sc.start.y, sc.start_speed, sc.start.heading, 0.0};
  const auto ticks = static_cast<std::size_t>(std::lround(sc.duration / sc.sim_dt));

  EpisodeMetrics m;
  m.seed = seed;
  double rank_sum = 0.0;
  std::size_t ranked = 0;
  PlanResult current;
  double t_since_plan = 0.0;
  ControlInput held;

  if (trace) {
    *trace = {};
    trace->times.push_back(0.0);
    trace->states.push_back(state);
  }

  std::size_t tick = 0;
  for (; tick < ticks; ++tick) {
    ControlInput u;
    if (use_genplan) {
      if (tick % static_cast<std::size_t>(sc.genplan_period_ticks) == 0) {
        current = plan(state, world, *ctl.genplan.model, *ctl.genplan.cache, *ctl.genplan.igrid, ctl.genplan.plan,
                       planner_rng, ctl.limits);
        t_since_plan = 0.0;
        ++m.plans;
        if (current.stats.fallback) {
          ++m.fallbacks;
        } else {
          rank_sum += static_cast<double>(current.stats.rank);
          ++ranked;
        }
        if (trace) {
          trace->plans.push_back(current.world_path);
          trace->plan_stats.push_back(current.stats);
          trace->plan_ticks.push_back(tick);
          trace->plan_costs.push_back(current.cost);
        }
      }
      u = pid_track(state, current.body_path, current.origin, t_since_plan, ctl.genplan.pid, ctl.limits);
    } else {
      if (tick % static_cast<std::size_t>(sc.mppi_period_ticks) == 0) {
        const MppiStepResult r = mppi_step(state, world, mppi_state, ctl.mppi, mppi_rng);
        held = r.control;
        ++m.plans;
        if (trace && tick % 20 == 0) {
          std::vector<ControlInput> seq{r.control};
          seq.insert(seq.end(), r.next.nominal.begin(), r.next.nominal.end() - 1);
          const auto states = mppi_rollout(state, seq, ctl.mppi);
          PosePath p;
          for (std::size_t i = 0; i < states.size(); ++i) {
            p.samples.push_back({static_cast<double>(i) * ctl.mppi.dt, states[i].x, states[i].y, states[i].phi});
          }
          trace->plans.push_back(std::move(p));
        }
        mppi_state = r.next;
      }
      u = held;
    }

    const VehicleState next = step(state, u, sc.sim_dt, ctl.limits);
    m.path_length += std::hypot(next.x - state.x, next.y - state.y);
    const bool hit = segment_collides({state.x, state.y}, {next.x, next.y}, world, sc.replay_ds);
    state = next;
    t_since_plan += sc.sim_dt;
    if (trace) {
      trace->times.push_back(static_cast<double>(tick + 1) * sc.sim_dt);
      trace->states.push_back(state);
    }
    if (hit) {
      m.collided = true;
      ++tick;
      break;
    }
  }

  m.elapsed = static_cast<double>(tick) * sc.sim_dt;
  m.terminal_x = state.x;
  m.avg_vel = m.elapsed > 0.0 ? m.path_length / m.elapsed : 0.0;
  m.exited = sc.kind == ScenarioKind::kCuldesac && !m.collided && state.x > sc.culdesac.rear_x;
  m.mean_rank = ranked > 0 ? rank_sum / static_cast<double>(ranked) : 0.0;
  return m;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Summary summarize(const std::vector<EpisodeMetrics>& trials) {
  Summary s;
  s.n_trials = trials.size();
  std::vector<double> xs, vs;
  std::size_t exits = 0, collisions = 0, ranked = 0;
  double rank_sum = 0.0;
  for (const auto& t : trials) {
    if (t.collided) {
      ++collisions;
    } else {
      xs.push_back(t.terminal_x);
      vs.push_back(t.avg_vel);
    }
    if (t.exited) ++exits;
    if (t.mean_rank > 0.0) {
      rank_sum += t.mean_rank;
      ++ranked;
    }
    s.fallbacks += t.fallbacks;
  }
  s.n_free = xs.size();
  if (s.n_trials > 0) {
    s.exit_pct = 100.0 * static_cast<double>(exits) / static_cast<double>(s.n_trials);
    s.collision_pct = 100.0 * static_cast<double>(collisions) / static_cast<double>(s.n_trials);
  }
  mean_std(xs, s.terminal_x_mean, s.terminal_x_std);
  mean_std(vs, s.avg_vel_mean, s.avg_vel_std);
  s.mean_rank = ranked > 0 ? rank_sum / static_cast<double>(ranked) : 0.0;
  return s;
}

BenchmarkResult benchmark(const ControllerSetup& ctl, const ScenarioConfig& sc, unsigned workers) {
  BenchmarkResult r;
  r.trials.resize(sc.n_trials);
  parallel_for(sc.n_trials, workers, [&](std::size_t i) {
    const std::uint64_t seed = sc.base_seed + i;
    const World world = scenario_world(sc, seed);
    r.trials[i] = run_episode(ctl, world, sc, seed);
  });
  r.summary = summarize(r.trials);
  return r;
}

namespace {

constexpr const char* kTrialsHeader =
    "seed,collided,exited,terminal_x,avg_vel,path_length,elapsed,plans,fallbacks,mean_rank";

void write_comment(std::ostream& out, const std::string& comment) {
  if (comment.empty()) return;
  std::istringstream lines(comment);
  std::string line;
  while (std::getline(lines, line)) out << "# " << line << '\n';
}

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<EpisodeMetrics>& trials, const std::string& comment) {
  write_comment(out, comment);
  out << kTrialsHeader << '\n';
  for (const auto& t : trials) {
    out << t.seed << ',' << (t.collided ? 1 : 0) << ',' << (t.exited ? 1 : 0) << ',' << format_double(t.terminal_x)
        << ',' << format_double(t.avg_vel) << ',' << format_double(t.path_length) << ','
        << format_double(t.elapsed) << ',' << t.plans << ',' << t.fallbacks << ',' << format_double(t.mean_rank)
        << '\n';
  }
}

std::vector<EpisodeMetrics> read_trials_csv(std::istream& in) {
  std::vector<EpisodeMetrics> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kTrialsHeader) throw FormatError("trials csv: unexpected header: " + line);
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw FormatError("trials csv: expected 10 fields: " + line);
    try {
      EpisodeMetrics m;
      m.seed = std::stoull(f[0]);
      m.collided = f[1] == "1";
      m.exited = f[2] == "1";
      m.terminal_x = std::stod(f[3]);
      m.avg_vel = std::stod(f[4]);
      m.path_length = std::stod(f[5]);
      m.elapsed = std::stod(f[6]);
      m.plans = std::stoull(f[7]);
      m.fallbacks = std::stoull(f[8]);
      m.mean_rank = std::stod(f[9]);
      out.push_back(m);
    } catch (const std::logic_error&) {
      throw FormatError("trials csv: bad number in: " + line);
    }
  }
  if (!header) throw FormatError("trials csv: missing header");
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, const std::string& comment) {
  write_comment(out, comment);
  out << "label,n_trials,exit_rate_pct,collision_pct,terminal_x_mean,terminal_x_std,avg_vel_mean,avg_vel_std,"
         "mean_rank,fallbacks\n";
  for (const auto& r : rows) {
    const Summary& s = r.summary;
    out << r.label << ',' << s.n_trials << ',' << format_double(s.exit_pct) << ',' << format_double(s.collision_pct)
        << ',' << format_double(s.terminal_x_mean) << ',' << format_double(s.terminal_x_std) << ','
        << format_double(s.avg_vel_mean) << ',' << format_double(s.avg_vel_std) << ','
        << format_double(s.mean_rank) << ',' << s.fallbacks << '\n';
  }
}

std::vector<std::pair<double, double>> sweep_sigmas() {
  std::vector<std::pair<double, double>> out{{0.1, 0.16 * std::numbers::pi}};
  for (int i = 1; i <= 10; ++i) {
    const double a = 0.5 * i;
    out.emplace_back(a, 1.6 * std::numbers::pi * a);
  }
  return out;
}

std::vector<SweepRow> mppi_sigma_sweep(const ControllerSetup& mppi_ctl, const ScenarioConfig& sc, unsigned workers) {
  std::vector<SweepRow> rows;
  for (const auto& [a, p] : sweep_sigmas()) {
    ControllerSetup ctl = mppi_ctl;
    ctl.kind = ControllerKind::kMppi;
    ctl.mppi.sigma_a = a;
    ctl.mppi.sigma_psidot = p;
    rows.push_back({a, p, benchmark(ctl, sc, workers)});
  }
  return rows;
}

}  // namespace genplan
