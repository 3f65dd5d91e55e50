// contour: single runs, seeded benchmarks, parameter sweeps and bound queries.
//
// Exit codes: 0 success, 1 planner failure (run), 2 usage or I/O error.

#include "lmpcc/geometry_bounds.hpp"
#include "lmpcc/sim/bench.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace lmpcc;
using namespace lmpcc::sim;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir{"."};
};

ScenarioConfig load_checked(const std::string& path) {
  if (path.empty()) throw UsageError("--config is required");
  auto c = load_config(path);
  (void)build_map(c);  // surfaces a missing grid file before any run starts
  return c;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  return out;
}

std::vector<PlannerKind> planners_from(const std::vector<std::string>& names) {
  std::vector<PlannerKind> out;
  for (const auto& n : names) out.push_back(planner_from_string(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local contouring control toolkit"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "scenario JSON file");
    if (needs_config) opt->required();
    sub->add_option("--seed", common.seed, "random seed (overrides the config)");
    sub->add_option("--out-dir", common.out_dir, "directory for output files");
  };

  // run
  auto* run = app.add_subcommand("run", "simulate one scenario");
  add_common(run, true);
  std::string run_planner;
  std::optional<int> run_agents;
  std::optional<double> run_vref, run_horizon;
  run->add_option("--planner", run_planner, "lmpcc | dw | mpc_track");
  run->add_option("--agents", run_agents, "number of random pedestrians");
  run->add_option("--v-ref", run_vref, "reference speed [m/s]");
  run->add_option("--horizon", run_horizon, "prediction horizon [s]");

  // bench
  auto* bench = app.add_subcommand("bench", "seeded batch over planners and pedestrian counts");
  add_common(bench, true);
  std::vector<std::string> bench_planners{"lmpcc", "dw"};
  std::vector<int> bench_agents{2, 4, 6};
  int bench_runs = 100;
  std::optional<double> bench_vref, bench_horizon;
  bench->add_option("--planner", bench_planners, "comma-separated planners")->delimiter(',');
  bench->add_option("--agents", bench_agents, "comma-separated pedestrian counts")->delimiter(',');
  bench->add_option("--runs", bench_runs, "runs per cell");
  bench->add_option("--v-ref", bench_vref, "reference speed [m/s]");
  bench->add_option("--horizon", bench_horizon, "prediction horizon [s]");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "clearance and solve-time matrix over v_ref and horizon");
  add_common(sweep, true);
  std::vector<double> sweep_vrefs{1.0, 1.25, 1.5};
  std::vector<double> sweep_horizons{1.0, 3.0, 5.0};
  int sweep_runs = 10;
  std::string sweep_planner;
  std::optional<int> sweep_agents;
  sweep->add_option("--v-ref", sweep_vrefs, "comma-separated reference speeds [m/s]")->delimiter(',');
  sweep->add_option("--horizon", sweep_horizons, "comma-separated horizons [s]")->delimiter(',');
  sweep->add_option("--runs", sweep_runs, "runs per cell");
  sweep->add_option("--planner", sweep_planner, "planner");
  sweep->add_option("--agents", sweep_agents, "number of random pedestrians");

  // bound
  auto* bound = app.add_subcommand("bound", "enlarged ellipse bounding ellipse (+) disc");
  double ba = 0.3, bb = 0.2, br = 0.3;
  int samples = 4096;
  bound->add_option("--a", ba, "semi-axis a [m]");
  bound->add_option("--b", bb, "semi-axis b [m]");
  bound->add_option("--r", br, "disc radius [m]");
  bound->add_option("--samples", samples, "boundary samples for the containment check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const fs::path out_dir(common.out_dir);
  ScenarioConfig cfg;
  try {
    if (!bound->parsed()) {
      cfg = load_checked(common.config);
      if (common.seed) cfg.seed = *common.seed;
    }
    if (run->parsed()) {
      if (!run_planner.empty()) cfg.planner = planner_from_string(run_planner);
      if (run_agents) {
        if (*run_agents < 0) throw UsageError("--agents must be >= 0");
        cfg.random_pedestrians.count = *run_agents;
      }
      cfg = with_overrides(cfg, run_vref, run_horizon);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (bound->parsed()) {
    try {
      const auto shape = EllipseShape::normalized(ba, bb);
      const auto res = minimal_enlargement(shape, br);
      const auto naive = containment_check(shape, br, br, samples);
      const auto check = containment_check(shape, br, res.delta, samples);
      // metric distance of the worst Minkowski point outside the naive ellipse
      double excess = 0.0;
      if (!naive.passed) {
        const Vec2 q = minkowski_boundary_point(shape, br, naive.worst_theta);
        excess = std::max(0.0, ellipse_signed_distance(EllipseShape(shape.a + br, shape.b + br), q));
      }
      json j = {{"a", shape.a},
                {"b", shape.b},
                {"r", br},
                {"delta", res.delta},
                {"alpha", res.alpha},
                {"beta", res.beta},
                {"contains", check.passed},
                {"naive_alpha", shape.a + br},
                {"naive_beta", shape.b + br},
                {"naive_contains", naive.passed},
                {"naive_worst_violation", naive.worst_violation},
                {"naive_excess_m", excess}};
      std::cout << j.dump(2) << '\n';
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }

  if (run->parsed()) {
    RunResult r;
    try {
      r = run_scenario(cfg);
    } catch (const std::exception& e) {
      std::cerr << "error: run failed: " << e.what() << '\n';
      return 1;
    }
    try {
      auto traj = open_out(out_dir, "trajectory.csv");
      write_trajectory_csv(traj, r);
      auto metrics = open_out(out_dir, "metrics.json");
      metrics << metrics_json(r).dump(2) << '\n';
      auto plot = open_out(out_dir, "plot.dat");
      write_plot_data(plot, r);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    const auto& m = r.metrics;
    std::cout << "outcome " << to_string(m.outcome) << " (" << m.detail << "), traveled "
              << format_number(m.traveled, 2) << " m in " << format_number(m.duration, 2) << " s, min clearance "
              << format_or_dash(m.min_clearance, 3) << " m\n";
    return m.outcome == Outcome::success ? 0 : 1;
  }

  if (bench->parsed()) {
    try {
      BenchRequest req;
      req.base = with_overrides(cfg, bench_vref, bench_horizon);
      req.planners = planners_from(bench_planners);
      req.agents = bench_agents;
      req.runs = bench_runs;
      req.seed = cfg.seed;
      req.threads = worker_count();
      const auto rep = run_bench(req);
      auto csv = open_out(out_dir, "bench.csv");
      write_bench_csv(csv, rep);
      auto txt = open_out(out_dir, "bench.txt");
      write_bench_text(txt, rep);
      auto js = open_out(out_dir, "bench.json");
      js << bench_json(rep).dump(2) << '\n';
      auto timing = open_out(out_dir, "bench_timing.csv");
      write_bench_timing(timing, rep);
      write_bench_text(std::cout, rep);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }

  try {
    SweepRequest req;
    req.base = cfg;
    if (!sweep_planner.empty()) req.base.planner = planner_from_string(sweep_planner);
    if (sweep_agents) req.base.random_pedestrians.count = *sweep_agents;
    req.v_refs = sweep_vrefs;
    req.horizons = sweep_horizons;
    req.runs = sweep_runs;
    req.seed = cfg.seed;
    req.threads = worker_count();
    const auto rep = run_sweep(req);
    auto csv = open_out(out_dir, "sweep.csv");
    write_sweep_csv(csv, rep);
    auto txt = open_out(out_dir, "sweep.txt");
    write_sweep_text(txt, rep, req);
    auto js = open_out(out_dir, "sweep.json");
    js << sweep_json(rep).dump(2) << '\n';
    write_sweep_text(std::cout, rep, req);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
