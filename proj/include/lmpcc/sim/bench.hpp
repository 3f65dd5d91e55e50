#pragma once

// Seeded batch runs over planners and pedestrian counts, parameter sweeps,
// and their tabular reports.

#include "lmpcc/sim/runner.hpp"

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

namespace lmpcc::sim {

/// Worker count: CONTOUR_THREADS if set to a positive integer, otherwise the
/// number of hardware threads (at least 1).
inline unsigned worker_count() {
  if (const char* env = std::getenv("CONTOUR_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, n) on a pool of workers. Each job writes only
/// its own slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

struct RunSummary {
  Outcome outcome{Outcome::stuck};
  bool error{false};
  std::string message;
  double min_clearance{std::numeric_limits<double>::infinity()};
  double traveled{0.0};
  int eta_violations{0};
  std::vector<double> solve_ms;
};

inline RunSummary summarize_run(const ScenarioConfig& c) {
  RunSummary s;
  try {
    const auto r = run_scenario(c, {.record_timing = true, .keep_log = false});
    s.outcome = r.metrics.outcome;
    s.min_clearance = r.metrics.min_clearance;
    s.traveled = r.metrics.traveled;
    s.eta_violations = r.metrics.eta_violations;
    s.solve_ms = r.metrics.solve_ms;
  } catch (const std::exception& e) {
    s.error = true;
    s.message = e.what();
  }
  return s;
}

struct BenchRow {
  std::string planner;
  int agents{0};
  int runs{0};
  double clearance_mean{std::numeric_limits<double>::quiet_NaN()};
  double clearance_p1{std::numeric_limits<double>::quiet_NaN()};
  double failure_pct{0.0};
  double collision_pct{0.0};
  double stuck_pct{0.0};  // includes runs that raised an error
  double distance_mean{std::numeric_limits<double>::quiet_NaN()};
  double distance_std{std::numeric_limits<double>::quiet_NaN()};
  int errors{0};
  int eta_violations{0};
  std::vector<double> solve_ms;  // pooled over runs, for the timing file only
};

/// Clearance columns use each run's minimum clearance; distance columns use
/// successful runs only.
inline BenchRow aggregate(std::string planner, int agents, std::span<const RunSummary> runs) {
  BenchRow row;
  row.planner = std::move(planner);
  row.agents = agents;
  row.runs = static_cast<int>(runs.size());
  std::vector<double> clear, dist;
  int collisions = 0, stuck = 0;
  for (const auto& r : runs) {
    if (r.error) {
      ++row.errors;
      ++stuck;
      continue;
    }
    row.eta_violations += r.eta_violations;
    if (std::isfinite(r.min_clearance)) clear.push_back(r.min_clearance);
    if (r.outcome == Outcome::collision) ++collisions;
    if (r.outcome == Outcome::stuck) ++stuck;
    if (r.outcome == Outcome::success) dist.push_back(r.traveled);
    row.solve_ms.insert(row.solve_ms.end(), r.solve_ms.begin(), r.solve_ms.end());
  }
  const double n = std::max(1, row.runs);
  row.collision_pct = 100.0 * collisions / n;
  row.stuck_pct = 100.0 * stuck / n;
  row.failure_pct = row.collision_pct + row.stuck_pct;
  if (!clear.empty()) {
    double s = 0.0;
    for (double v : clear) s += v;
    row.clearance_mean = s / static_cast<double>(clear.size());
    row.clearance_p1 = percentile(clear, 1.0);
  }
  if (!dist.empty()) {
    double s = 0.0, s2 = 0.0;
    for (double v : dist) s += v;
    const double mean = s / static_cast<double>(dist.size());
    for (double v : dist) s2 += (v - mean) * (v - mean);
    row.distance_mean = mean;
    row.distance_std = std::sqrt(s2 / static_cast<double>(dist.size()));
  }
  return row;
}

struct BenchRequest {
  ScenarioConfig base;
  std::vector<PlannerKind> planners{PlannerKind::lmpcc, PlannerKind::dw};
  std::vector<int> agents{2, 4, 6};
  int runs{100};
  std::uint64_t seed{1};  // run i uses seed + i
  unsigned threads{1};
};

struct BenchReport {
  std::vector<BenchRow> rows;
  json config;
};

inline BenchReport run_bench(const BenchRequest& req) {
  if (req.runs < 1) throw InvalidInput("bench: runs must be >= 1");
  if (req.planners.empty() || req.agents.empty()) throw InvalidInput("bench: empty planner or agent list");
  for (int n : req.agents)
    if (n < 0) throw InvalidInput("bench: negative agent count");
  const std::size_t runs = static_cast<std::size_t>(req.runs);
  const std::size_t cells = req.planners.size() * req.agents.size();
  std::vector<RunSummary> results(cells * runs);
  parallel_for(results.size(), req.threads, [&](std::size_t i) {
    const std::size_t cell = i / runs, run = i % runs;
    ScenarioConfig c = req.base;
    c.planner = req.planners[cell / req.agents.size()];
    c.random_pedestrians.count = req.agents[cell % req.agents.size()];
    c.seed = req.seed + run;
    results[i] = summarize_run(c);
  });
  BenchReport rep;
  for (std::size_t cell = 0; cell < cells; ++cell)
    rep.rows.push_back(aggregate(to_string(req.planners[cell / req.agents.size()]),
                                 req.agents[cell % req.agents.size()],
                                 std::span<const RunSummary>(results).subspan(cell * runs, runs)));
  rep.config = config_to_json(req.base);
  rep.config["bench"] = {{"runs", req.runs}, {"seed", req.seed}, {"agents", req.agents}};
  json planners = json::array();
  for (auto p : req.planners) planners.push_back(to_string(p));
  rep.config["bench"]["planners"] = planners;
  return rep;
}

inline std::string format_or_dash(double v, int precision) {
  return std::isfinite(v) ? format_number(v, precision) : std::string("-");
}

inline void write_bench_csv(std::ostream& out, const BenchReport& rep) {
  out << "planner,agents,runs,clearance_mean,clearance_p1,failures_pct,collisions_pct,stuck_pct,"
         "distance_mean,distance_std\n";
  for (const auto& r : rep.rows)
    out << r.planner << ',' << r.agents << ',' << r.runs << ',' << format_or_dash(r.clearance_mean, 3) << ','
        << format_or_dash(r.clearance_p1, 3) << ',' << format_number(r.failure_pct, 1) << ','
        << format_number(r.collision_pct, 1) << ',' << format_number(r.stuck_pct, 1) << ','
        << format_or_dash(r.distance_mean, 2) << ',' << format_or_dash(r.distance_std, 2) << '\n';
}

/// Left-aligned columns padded to the widest cell.
inline void write_aligned(std::ostream& out, const std::vector<std::vector<std::string>>& table) {
  std::vector<std::size_t> width;
  for (const auto& row : table)
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], row[i].size());
    }
  for (const auto& row : table) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size()) line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    out << line << '\n';
  }
}

inline void write_bench_text(std::ostream& out, const BenchReport& rep) {
  std::vector<std::vector<std::string>> t;
  t.push_back({"planner", "agents", "runs", "clearance mean (p1) [m]", "failures [%] (collisions / stuck)",
               "distance mean (std) [m]"});
  for (const auto& r : rep.rows)
    t.push_back({r.planner, std::to_string(r.agents), std::to_string(r.runs),
                 format_or_dash(r.clearance_mean, 2) + " (" + format_or_dash(r.clearance_p1, 3) + ")",
                 format_number(r.failure_pct, 1) + " (" + format_number(r.collision_pct, 1) + " / " +
                     format_number(r.stuck_pct, 1) + ")",
                 format_or_dash(r.distance_mean, 2) + " (" + format_or_dash(r.distance_std, 2) + ")"});
  write_aligned(out, t);
}

inline json bench_json(const BenchReport& rep) {
  json rows = json::array();
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& r : rep.rows)
    rows.push_back({{"planner", r.planner},
                    {"agents", r.agents},
                    {"runs", r.runs},
                    {"clearance_mean", num(r.clearance_mean)},
                    {"clearance_p1", num(r.clearance_p1)},
                    {"failures_pct", r.failure_pct},
                    {"collisions_pct", r.collision_pct},
                    {"stuck_pct", r.stuck_pct},
                    {"errors", r.errors},
                    {"distance_mean", num(r.distance_mean)},
                    {"distance_std", num(r.distance_std)}});
  return {{"rows", rows}, {"config", rep.config}};
}

struct TimingStats {
  double median{0.0}, q1{0.0}, q3{0.0}, p99{0.0}, max{0.0};
  std::size_t samples{0};
};

inline TimingStats timing_stats(const std::vector<double>& ms) {
  TimingStats s;
  s.samples = ms.size();
  if (ms.empty()) return s;
  s.median = percentile(ms, 50);
  s.q1 = percentile(ms, 25);
  s.q3 = percentile(ms, 75);
  s.p99 = percentile(ms, 99);
  s.max = *std::max_element(ms.begin(), ms.end());
  return s;
}

inline void write_bench_timing(std::ostream& out, const BenchReport& rep) {
  out << "planner,agents,samples,solve_median_ms,solve_q1_ms,solve_q3_ms,solve_p99_ms,solve_max_ms\n";
  for (const auto& r : rep.rows) {
    const auto s = timing_stats(r.solve_ms);
    out << r.planner << ',' << r.agents << ',' << s.samples << ',' << format_number(s.median, 3) << ','
        << format_number(s.q1, 3) << ',' << format_number(s.q3, 3) << ',' << format_number(s.p99, 3) << ','
        << format_number(s.max, 3) << '\n';
  }
}

// ---------------------------------------------------------------------------
// sweeps over reference speed and horizon length

struct SweepRequest {
  ScenarioConfig base;
  std::vector<double> v_refs{1.0, 1.25, 1.5};
  std::vector<double> horizons{1.0, 3.0, 5.0};  // seconds
  int runs{10};
  std::uint64_t seed{1};
  unsigned threads{1};
};

struct SweepCell {
  double v_ref{0.0};
  double horizon{0.0};
  int steps{0};
  BenchRow stats;
  TimingStats timing;
  std::optional<std::string> reference;  // published value for this cell, if any
};

struct SweepReport {
  std::vector<SweepCell> cells;  // v_ref major
  json config;
};

/// Published clearance for the 3 s / 1.25 m/s setting, kept for comparison.
inline std::optional<std::string> sweep_reference(double v_ref, double horizon) {
  if (std::abs(v_ref - 1.25) < 1e-9 && std::abs(horizon - 3.0) < 1e-9) return "1.69 (0.072)";
  return std::nullopt;
}

inline ScenarioConfig with_overrides(ScenarioConfig c, std::optional<double> v_ref, std::optional<double> horizon) {
  if (v_ref) {
    if (!(*v_ref > 0.0)) throw InvalidInput("v_ref must be positive");
    c.path.v_ref = *v_ref;
  }
  if (horizon) {
    if (!(*horizon > 0.0)) throw InvalidInput("horizon must be positive");
    c.steps = std::max(1, static_cast<int>(std::lround(*horizon / c.tau)));
  }
  return c;
}

inline SweepReport run_sweep(const SweepRequest& req) {
  if (req.v_refs.empty() || req.horizons.empty()) throw InvalidInput("sweep: empty v_ref or horizon list");
  if (req.runs < 1) throw InvalidInput("sweep: runs must be >= 1");
  const std::size_t runs = static_cast<std::size_t>(req.runs);
  const std::size_t cells = req.v_refs.size() * req.horizons.size();
  std::vector<ScenarioConfig> configs;
  for (double v : req.v_refs)
    for (double h : req.horizons) configs.push_back(with_overrides(req.base, v, h));
  std::vector<RunSummary> results(cells * runs);
  parallel_for(results.size(), req.threads, [&](std::size_t i) {
    ScenarioConfig c = configs[i / runs];
    c.seed = req.seed + i % runs;
    results[i] = summarize_run(c);
  });
  SweepReport rep;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    SweepCell sc;
    sc.v_ref = req.v_refs[cell / req.horizons.size()];
    sc.horizon = req.horizons[cell % req.horizons.size()];
    sc.steps = configs[cell].steps;
    sc.stats = aggregate(to_string(req.base.planner), req.base.random_pedestrians.count,
                         std::span<const RunSummary>(results).subspan(cell * runs, runs));
    sc.timing = timing_stats(sc.stats.solve_ms);
    sc.reference = sweep_reference(sc.v_ref, sc.horizon);
    rep.cells.push_back(std::move(sc));
  }
  rep.config = config_to_json(req.base);
  rep.config["sweep"] = {{"v_refs", req.v_refs}, {"horizons", req.horizons}, {"runs", req.runs}, {"seed", req.seed}};
  return rep;
}

inline void write_sweep_csv(std::ostream& out, const SweepReport& rep) {
  out << "v_ref,horizon_s,steps,runs,clearance_mean,clearance_p1,failures_pct,solve_median_ms,solve_q1_ms,"
         "solve_q3_ms,solve_p99_ms,reference\n";
  for (const auto& c : rep.cells)
    out << format_number(c.v_ref, 2) << ',' << format_number(c.horizon, 2) << ',' << c.steps << ','
        << c.stats.runs << ',' << format_or_dash(c.stats.clearance_mean, 3) << ','
        << format_or_dash(c.stats.clearance_p1, 3) << ',' << format_number(c.stats.failure_pct, 1) << ','
        << format_number(c.timing.median, 3) << ',' << format_number(c.timing.q1, 3) << ','
        << format_number(c.timing.q3, 3) << ',' << format_number(c.timing.p99, 3) << ','
        << (c.reference ? *c.reference : std::string()) << '\n';
}

/// Matrix layout: one row per v_ref, one column per horizon; each entry is
/// "clearance mean (p1)" followed by the solve-time median and p99.
inline void write_sweep_text(std::ostream& out, const SweepReport& rep, const SweepRequest& req) {
  std::vector<std::vector<std::string>> t;
  std::vector<std::string> head{"v_ref \\ horizon"};
  for (double h : req.horizons) head.push_back(format_number(h, 1) + " s");
  t.push_back(head);
  for (std::size_t i = 0; i < req.v_refs.size(); ++i) {
    std::vector<std::string> clear{format_number(req.v_refs[i], 2) + " m/s"};
    std::vector<std::string> timing{""};
    for (std::size_t j = 0; j < req.horizons.size(); ++j) {
      const auto& c = rep.cells[i * req.horizons.size() + j];
      clear.push_back(format_or_dash(c.stats.clearance_mean, 2) + " (" + format_or_dash(c.stats.clearance_p1, 3) +
                      ")" + (c.reference ? " ref " + *c.reference : std::string()));
      timing.push_back("solve " + format_number(c.timing.median, 1) + " / " + format_number(c.timing.p99, 1) + " ms");
    }
    t.push_back(clear);
    t.push_back(timing);
  }
  write_aligned(out, t);
}

inline json sweep_json(const SweepReport& rep) {
  json cells = json::array();
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& c : rep.cells) {
    json j = {{"v_ref", c.v_ref},
              {"horizon", c.horizon},
              {"steps", c.steps},
              {"runs", c.stats.runs},
              {"clearance_mean", num(c.stats.clearance_mean)},
              {"clearance_p1", num(c.stats.clearance_p1)},
              {"failures_pct", c.stats.failure_pct},
              {"solve_ms",
               {{"median", c.timing.median}, {"q1", c.timing.q1}, {"q3", c.timing.q3}, {"p99", c.timing.p99}}}};
    if (c.reference) j["reference_clearance"] = *c.reference;
    cells.push_back(j);
  }
  return {{"cells", cells}, {"config", rep.config}};
}

}  // namespace lmpcc::sim
