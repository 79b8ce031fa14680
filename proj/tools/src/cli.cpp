#include "genplan/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "genplan/config.hpp"
#include "genplan/errors.hpp"
#include "genplan/experiments.hpp"
#include "genplan/flow_train.hpp"
#include "genplan/io.hpp"
#include "genplan/mask_cache.hpp"
#include "genplan/planner.hpp"
#include "genplan/svg.hpp"
#include "genplan/version.hpp"

namespace genplan {
namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Context {
  PipelineConfig cfg;
  Digest hash{};
  std::string stamp;  // comment line embedded in text artifacts
  std::ostream* out = nullptr;
};

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  write_file_text(path, text);
}

std::string out_path(const Context& ctx, const std::string& name) {
  return (fs::path(ctx.cfg.paths.output_dir) / name).string();
}

Context make_context(const std::string& config_path, std::ostream& out, const std::string& scenario_kind,
                     std::size_t trials) {
  Context ctx;
  ctx.cfg = config_path.empty() ? parse_config("") : load_config(config_path);
  if (!scenario_kind.empty()) ctx.cfg.scenario.kind = parse_scenario_kind(scenario_kind);
  if (trials > 0) ctx.cfg.scenario.n_trials = trials;
  ctx.hash = config_hash(ctx.cfg);
  ctx.stamp = std::string("genplan ") + kToolVersion + " config " + to_hex(ctx.hash);
  ctx.out = &out;
  write_text(out_path(ctx, "resolved_config.json"), dump_config(ctx.cfg));
  return ctx;
}

struct LoadedPlanner {
  FlowModel model;
  MaskCache cache;
  InputGrid igrid;
};

LoadedPlanner load_planner(const Context& ctx) {
  LoadedPlanner lp{load_flow(ctx.cfg.paths.model), load_cache(ctx.cfg.paths.cache), InputGrid(1)};
  lp.cache.require_model(lp.model);
  if (lp.cache.bins() != ctx.cfg.grid_bins) {
    throw ConfigError("cache " + ctx.cfg.paths.cache + " was built with grid.bins = " +
                      std::to_string(lp.cache.bins()) + ", config asks for " + std::to_string(ctx.cfg.grid_bins));
  }
  if (!(lp.cache.atomic_grid() == ctx.cfg.roi)) {
    throw ConfigError("cache " + ctx.cfg.paths.cache + " was built for a different roi");
  }
  lp.igrid = InputGrid(lp.cache.bins());
  return lp;
}

ControllerSetup controller(const Context& ctx, ControllerKind kind, const LoadedPlanner* lp) {
  ControllerSetup c;
  c.kind = kind;
  c.limits = ctx.cfg.vehicle;
  c.mppi = ctx.cfg.mppi;
  c.genplan.plan = ctx.cfg.planner;
  c.genplan.pid = ctx.cfg.pid;
  if (lp) {
    c.genplan.model = &lp->model;
    c.genplan.cache = &lp->cache;
    c.genplan.igrid = &lp->igrid;
  }
  return c;
}

std::string summary_line(const std::string& label, const Summary& s) {
  return label + ": exit " + fixed(s.exit_pct, 1) + "%  collision " + fixed(s.collision_pct, 1) + "%  terminal x " +
         fixed(s.terminal_x_mean, 2) + " +- " + fixed(s.terminal_x_std, 2) + "  avg vel " +
         fixed(s.avg_vel_mean, 2) + " +- " + fixed(s.avg_vel_std, 2) + "  mean rank " + fixed(s.mean_rank, 2) +
         "  fallbacks " + std::to_string(s.fallbacks);
}

std::string trials_csv(const Context& ctx, const std::vector<EpisodeMetrics>& trials) {
  std::ostringstream s;
  write_trials_csv(s, trials, ctx.stamp);
  return s.str();
}

// ---- subcommands --------------------------------------------------------

void cmd_gen_data(const Context& ctx) {
  Rng rng = make_rng(ctx.cfg.seed, Stream::kData);
  const auto data = synth_expert(rng, ctx.cfg.data);
  std::ostringstream s;
  write_primitives_csv(s, data, ctx.stamp);
  write_text(ctx.cfg.paths.dataset, s.str());
  *ctx.out << "wrote " << data.size() << " primitives to " << ctx.cfg.paths.dataset << '\n';
}

void cmd_train(const Context& ctx) {
  std::ifstream in(ctx.cfg.paths.dataset);
  if (!in) throw ConfigError("cannot open file: " + ctx.cfg.paths.dataset);
  std::vector<Vec4> data;
  for (const auto& p : read_primitives_csv(in)) data.push_back(p.to_array());
  TrainReport report;
  const FlowModel model = train_flow(data, ctx.cfg.train, &report);
  ensure_parent(ctx.cfg.paths.model);
  save_flow(model, ctx.cfg.paths.model, ctx.hash);

  std::ostringstream log;
  log << "# " << ctx.stamp << "\nepoch,train_nll,val_nll\n";
  log << 0 << ',' << format_double(report.initial_train_nll) << ',' << format_double(report.initial_val_nll) << '\n';
  for (std::size_t e = 0; e < report.train_nll.size(); ++e) {
    log << e + 1 << ',' << format_double(report.train_nll[e]) << ',' << format_double(report.val_nll[e]) << '\n';
  }
  write_text(out_path(ctx, "train_log.csv"), log.str());
  *ctx.out << "trained on " << report.n_train << " / validated on " << report.n_val << " primitives; val nll "
           << fixed(report.initial_val_nll, 4) << " -> " << fixed(report.best_val_nll, 4) << " (epoch "
           << report.best_epoch << ")\nwrote " << ctx.cfg.paths.model << '\n';
}

void cmd_build_cache(const Context& ctx) {
  const FlowModel model = load_flow(ctx.cfg.paths.model);
  MaskCache cache = build_cache(model, InputGrid(ctx.cfg.grid_bins), ctx.cfg.roi, ctx.cfg.cache);
  cache.set_config_hash(ctx.hash);
  ensure_parent(ctx.cfg.paths.cache);
  save_cache(cache, ctx.cfg.paths.cache);
  *ctx.out << "wrote " << ctx.cfg.paths.cache << " (" << cache_file_size(cache) << " bytes)\n";
}

World named_world(const Context& ctx, const std::string& kind, std::uint64_t seed) {
  if (kind == "empty") return World{};
  ScenarioConfig sc = ctx.cfg.scenario;
  sc.kind = parse_scenario_kind(kind);
  return scenario_world(sc, seed);
}

void cmd_plan_once(const Context& ctx, const std::string& world_kind, std::uint64_t seed, std::string svg) {
  const LoadedPlanner lp = load_planner(ctx);
  const World world = named_world(ctx, world_kind, seed);
  const auto& sc = ctx.cfg.scenario;
  const VehicleState state{sc.start.x, sc.start.y, sc.start_speed, sc.start.heading, 0.0};
  PlanConfig pc = ctx.cfg.planner;
  pc.record_samples = true;
  Rng rng = make_rng(seed, Stream::kPlanner);
  const PlanResult r = plan(state, world, lp.model, lp.cache, lp.igrid, pc, rng, ctx.cfg.vehicle);
  if (svg.empty()) svg = out_path(ctx, "plan_once.svg");
  write_text(svg, render_plan_svg(world, r, ctx.cfg.roi));
  const auto& s = r.stats;
  *ctx.out << "draws " << s.draws << "  rejects " << s.rejects << "  accepted " << s.accepted << "  checks "
           << s.checks << "  rank " << s.rank << "  atomic maps " << s.atomic_maps << "  rejected cells "
           << s.rejected_cells << (s.fallback ? "  FALLBACK" : "") << "\nchosen alpha " << fixed(r.theta.alpha)
           << " kappa " << fixed(r.theta.kappa1) << ' ' << fixed(r.theta.kappa2) << ' ' << fixed(r.theta.kappa3)
           << "  cost " << fixed(r.cost) << "\nwrote " << svg << '\n';
}

void cmd_run(const Context& ctx, ControllerKind kind, std::uint64_t seed) {
  std::optional<LoadedPlanner> lp;
  if (kind == ControllerKind::kGenPlan) lp = load_planner(ctx);
  const ControllerSetup ctl = controller(ctx, kind, lp ? &*lp : nullptr);
  const World world = scenario_world(ctx.cfg.scenario, seed);
  EpisodeTrace trace;
  const EpisodeMetrics m = run_episode(ctl, world, ctx.cfg.scenario, seed, &trace);
  const std::string stem = "run_" + to_string(ctx.cfg.scenario.kind) + "_" + to_string(kind) + "_" +
                           std::to_string(seed);
  write_text(out_path(ctx, stem + ".svg"), render_episode_svg(world, trace, kind));
  std::ostringstream traj;
  traj << "# " << ctx.stamp << "\nt,x,y,v,phi,psi\n";
  for (std::size_t i = 0; i < trace.states.size(); ++i) {
    const auto& s = trace.states[i];
    traj << format_double(trace.times[i]) << ',' << format_double(s.x) << ',' << format_double(s.y) << ','
         << format_double(s.v) << ',' << format_double(s.phi) << ',' << format_double(s.psi) << '\n';
  }
  write_text(out_path(ctx, stem + "_trajectory.csv"), traj.str());
  write_text(out_path(ctx, stem + ".csv"), trials_csv(ctx, {m}));
  if (kind == ControllerKind::kGenPlan) {
    std::ostringstream tel;
    tel << "# " << ctx.stamp << "\ntick,draws,rejects,accepted,checks,rank,fallback,cost\n";
    for (std::size_t i = 0; i < trace.plan_stats.size(); ++i) {
      const auto& s = trace.plan_stats[i];
      tel << trace.plan_ticks[i] << ',' << s.draws << ',' << s.rejects << ',' << s.accepted << ',' << s.checks << ','
          << s.rank << ',' << (s.fallback ? 1 : 0) << ',' << format_double(trace.plan_costs[i]) << '\n';
    }
    write_text(out_path(ctx, stem + "_planner.csv"), tel.str());
  }
  *ctx.out << to_string(kind) << " seed " << seed << ": " << (m.collided ? "collided" : "no collision")
           << (m.exited ? ", exited" : "") << "  terminal x " << fixed(m.terminal_x) << "  avg vel "
           << fixed(m.avg_vel) << "  fallbacks " << m.fallbacks << "  mean rank " << fixed(m.mean_rank, 2) << '\n';
}

std::vector<ControllerKind> controllers_for(const std::string& which) {
  if (which == "both") return {ControllerKind::kGenPlan, ControllerKind::kMppi};
  return {parse_controller_kind(which)};
}

void cmd_bench(const Context& ctx, const std::string& which) {
  const auto kinds = controllers_for(which);
  std::optional<LoadedPlanner> lp;
  if (std::find(kinds.begin(), kinds.end(), ControllerKind::kGenPlan) != kinds.end()) lp = load_planner(ctx);
  const ScenarioConfig& sc = ctx.cfg.scenario;
  const std::string scen = to_string(sc.kind);
  std::vector<SummaryRow> rows;
  for (const auto kind : kinds) {
    const ControllerSetup ctl = controller(ctx, kind, lp ? &*lp : nullptr);
    const BenchmarkResult r = benchmark(ctl, sc, ctx.cfg.workers);
    write_text(out_path(ctx, "trials_" + scen + "_" + to_string(kind) + ".csv"), trials_csv(ctx, r.trials));
    rows.push_back({to_string(kind), r.summary});
    *ctx.out << summary_line(to_string(kind), r.summary) << '\n';
    for (std::size_t i = 0; i < std::min(ctx.cfg.plots, sc.n_trials); ++i) {
      const std::uint64_t seed = sc.base_seed + i;
      const World world = scenario_world(sc, seed);
      EpisodeTrace trace;
      run_episode(ctl, world, sc, seed, &trace);
      write_text(out_path(ctx, "rollout_" + scen + "_" + to_string(kind) + "_" + std::to_string(seed) + ".svg"),
                 render_episode_svg(world, trace, kind));
    }
  }
  std::ostringstream s;
  write_summary_csv(s, rows, ctx.stamp + "\nscenario " + scen + ", " + std::to_string(sc.n_trials) + " trials");
  write_text(out_path(ctx, "summary_" + scen + ".csv"), s.str());
  *ctx.out << "wrote " << out_path(ctx, "summary_" + scen + ".csv") << '\n';
}

void cmd_sweep(const Context& ctx) {
  const ControllerSetup ctl = controller(ctx, ControllerKind::kMppi, nullptr);
  const ScenarioConfig& sc = ctx.cfg.scenario;
  const auto rows = mppi_sigma_sweep(ctl, sc, ctx.cfg.workers);
  std::vector<SummaryRow> out;
  std::ostringstream trials;
  for (const auto& r : rows) {
    const std::string label = "(" + format_double(r.sigma_a) + " " + format_double(r.sigma_psidot) + ")";
    out.push_back({label, r.result.summary});
    *ctx.out << summary_line("sigma " + fixed(r.sigma_a, 1) + "/" + fixed(r.sigma_psidot, 3), r.result.summary)
             << '\n';
    write_trials_csv(trials, r.result.trials, trials.tellp() == 0 ? ctx.stamp + "\nsigma " + label : "sigma " + label);
  }
  std::ostringstream s;
  write_summary_csv(s, out, ctx.stamp + "\nmppi sigma sweep, scenario " + to_string(sc.kind));
  write_text(out_path(ctx, "sweep_" + to_string(sc.kind) + ".csv"), s.str());
  write_text(out_path(ctx, "sweep_" + to_string(sc.kind) + "_trials.csv"), trials.str());
  *ctx.out << "wrote " << out_path(ctx, "sweep_" + to_string(sc.kind) + ".csv") << '\n';
}

void cmd_inspect_cache(const Context& ctx) {
  const MaskCache cache = load_cache(ctx.cfg.paths.cache);
  const auto& g = cache.atomic_grid();
  std::size_t lo = cache.n_cells(), hi = 0, total = 0, empty = 0;
  for (std::uint32_t a = 0; a < g.size(); ++a) {
    const std::size_t c = cache.map_popcount(a);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
    total += c;
    if (c == 0) ++empty;
  }
  const double mean = static_cast<double>(total) / static_cast<double>(g.size());
  auto& o = *ctx.out;
  o << "file          " << ctx.cfg.paths.cache << " (" << cache_file_size(cache) << " bytes)\n"
    << "bins          " << cache.bins() << " (" << cache.n_cells() << " cells)\n"
    << "atomic grid   " << g.nx << " x " << g.ny << ", x [" << g.x_min << ", " << g.x_max << "], y [" << g.y_min
    << ", " << g.y_max << "], r_atom " << g.r_atom << '\n'
    << "ds            " << cache.ds() << "\nrecon samples " << cache.reconstruct_samples() << "\nkappa max     "
    << cache.kappa_max() << "\nflow checksum " << to_hex(cache.flow_checksum()) << "\nconfig hash   "
    << to_hex(cache.config_hash()) << '\n'
    << "popcount      min " << lo << "  mean " << fixed(mean, 1) << "  max " << hi << "  (mean fraction "
    << fixed(mean / static_cast<double>(cache.n_cells()), 4) << ", empty maps " << empty << ")\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GenPlan: flow-based motion primitive planner, MPPI baseline and benchmark harness"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file (defaults when omitted)");

  auto* gen = app.add_subcommand("gen-data", "synthesize the expert primitive dataset");
  auto* train = app.add_subcommand("train", "train the flow on the dataset");
  auto* cache = app.add_subcommand("build-cache", "build the mask cache for the trained flow");

  auto* once = app.add_subcommand("plan-once", "run one planning tick and plot every sample");
  std::string world_kind = "random";
  std::uint64_t seed = 1;
  std::string svg;
  once->add_option("--world", world_kind, "empty | random | culdesac")->check(
      CLI::IsMember({"empty", "random", "culdesac"}));
  once->add_option("--seed", seed, "world and sampling seed");
  once->add_option("--svg", svg, "output SVG (default <output_dir>/plan_once.svg)");

  auto* run = app.add_subcommand("run", "simulate a single episode");
  std::string which = "genplan";
  run->add_option("--controller", which, "genplan | mppi")->check(CLI::IsMember({"genplan", "mppi"}));
  run->add_option("--seed", seed, "trial seed");

  auto* bench = app.add_subcommand("bench", "run the seeded benchmark");
  std::string bench_which = "both";
  bench->add_option("--controller", bench_which, "genplan | mppi | both")
      ->check(CLI::IsMember({"genplan", "mppi", "both"}));

  auto* sweep = app.add_subcommand("sweep", "MPPI sampling-noise sweep");
  auto* inspect = app.add_subcommand("inspect-cache", "print the cache header and popcount statistics");

  std::string scenario_kind;
  std::size_t trials = 0;
  for (auto* sub : {run, bench, sweep}) {
    sub->add_option("--scenario", scenario_kind, "random | culdesac (overrides scenario.kind)")
        ->check(CLI::IsMember({"random", "culdesac"}));
  }
  for (auto* sub : {bench, sweep}) sub->add_option("--trials", trials, "trial count (overrides scenario.n_trials)");
  for (auto* sub : {gen, train, cache, once, run, bench, sweep, inspect}) {
    sub->add_option("-c,--config", config_path, "JSON config file (defaults when omitted)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sweep && scenario_kind.empty()) scenario_kind = "culdesac";
    Context ctx = make_context(config_path, out, scenario_kind, trials);
    if (*gen) cmd_gen_data(ctx);
    if (*train) cmd_train(ctx);
    if (*cache) cmd_build_cache(ctx);
    if (*once) cmd_plan_once(ctx, world_kind, seed, svg);
    if (*run) cmd_run(ctx, parse_controller_kind(which), seed);
    if (*bench) cmd_bench(ctx, bench_which);
    if (*sweep) cmd_sweep(ctx);
    if (*inspect) cmd_inspect_cache(ctx);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace genplan
