#pragma once

// Fixed-step closed-loop simulation of one scenario plus its artifacts
// (trajectory CSV, metrics JSON, gnuplot data).

#include "lmpcc/sim/collision.hpp"
#include "lmpcc/sim/scenario.hpp"

#include <deque>
#include <iomanip>
#include <ostream>

namespace lmpcc::sim {

enum class Outcome { success, collision, stuck };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    default: return "stuck";
  }
}

struct RunOptions {
  bool record_timing{true};  // false: solve_ms logged as 0 so logs are byte-stable
  bool keep_log{true};
};

struct TrajectoryRow {
  double t{0.0}, x{0.0}, y{0.0}, psi{0.0}, v{0.0}, omega{0.0}, theta{0.0};
  double solve_ms{0.0};
  std::string status;
  double clearance{std::numeric_limits<double>::infinity()};
  double contour_error{0.0};  // signed lateral offset from the path, not exported
};

struct RunMetrics {
  Outcome outcome{Outcome::stuck};
  double min_clearance{std::numeric_limits<double>::infinity()};
  double mean_clearance{std::numeric_limits<double>::infinity()};
  double traveled{0.0};
  double duration{0.0};
  std::vector<double> solve_ms;
  int cycles{0};
  int eta_violations{0};
  int infeasible_cycles{0};
  int braking_cycles{0};
  int max_iter_cycles{0};
  int cold_iterations{-1};  // iterations of the first (cold) solve
  double final_theta{0.0};
  std::string detail;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<TrajectoryRow> log;
  std::vector<std::vector<Vec2>> pedestrian_tracks;
  std::vector<ConvexRegion> last_regions;
  std::vector<Vec2> reference;  // sampled path for plotting
  json config;
};

namespace detail {

template <class Model>
typename Model::State initial_state(const ScenarioConfig& c) {
  typename Model::State x = Model::State::Zero();
  x(0) = c.start.x();
  x(1) = c.start.y();
  x(2) = c.start.z();
  if constexpr (Model::kSpeedState >= 0) x(Model::kSpeedState) = c.start_speed;
  return x;
}

inline PlannerConfig planner_config(const ScenarioConfig& c) {
  PlannerConfig p;
  p.tau = c.tau;
  p.horizon = c.steps;
  p.epsilon = c.epsilon;
  p.weights = c.weights;
  p.limits = c.limits;
  p.footprint = c.footprint;
  p.search = c.search;
  p.solver = c.solver;
  p.prediction = c.prediction;
  p.track_lookahead = c.track_lookahead;
  if (c.planner == PlannerKind::mpc_track) {
    p.mode = CostMode::tracking;
    p.static_constraints = false;
    p.dynamic_constraints = false;
  }
  return p;
}

inline double signed_offset(const ReferencePath& path, Vec2 p, double theta) {
  const Vec2 t = path.tangent(theta).normalized();
  const Vec2 d = p - path.position(theta);
  return t.x() * d.y() - t.y() * d.x();
}

template <class Model>
RunResult run_model(const ScenarioConfig& c, const Model& model, const RunOptions& opt) {
  RunResult res;
  res.config = config_to_json(c);
  const ReferencePath path = build_path(c);
  const OccupancyGrid map = build_map(c);
  auto peds = build_pedestrians(c, c.seed);
  const double total = path.total_length();
  const Vec2 goal = path.position(total);
  for (int i = 0; i <= 400; ++i) res.reference.push_back(path.position(total * i / 400.0));
  res.pedestrian_tracks.resize(peds.size());

  std::optional<LmpccPlanner<Model>> planner;
  std::optional<DynamicWindowPlanner> dw;
  if (c.planner == PlannerKind::dw) {
    if constexpr (!std::is_same_v<Model, UnicycleModel>)
      throw ConfigError("the dynamic window baseline needs the unicycle model");
    dw.emplace(path_waypoints(c), c.dw, c.limits, c.footprint);
  } else {
    planner.emplace(path, planner_config(c), model);
  }

  ObstacleTracker tracker(c.kalman);
  PredictionOptions popt = c.prediction;
  tracker.set_options(popt);
  std::mt19937_64 noise_rng(c.seed * 0xD1B54A32D192ED03ULL + 5);
  std::normal_distribution<double> noise(0.0, 1.0);

  typename Model::State x = initial_state<Model>(c);
  typename Model::Input command = Model::Input::Zero();
  if constexpr (std::is_same_v<Model, UnicycleModel>) command(0) = c.start_speed;
  UnicycleModel::Input executed = UnicycleModel::Input::Zero();  // (v, omega) for the baseline window
  executed(0) = c.start_speed;

  const double dt = c.control_period;
  const int max_cycles = static_cast<int>(std::ceil(c.time_budget / dt - 1e-9));
  double progress = estimate_theta0(path, Vec2(x(0), x(1))).theta;
  std::deque<std::pair<double, double>> history;  // (t, progress)
  history.emplace_back(0.0, progress);
  double clear_sum = 0.0;
  int clear_count = 0;
  auto& m = res.metrics;
  m.outcome = Outcome::stuck;
  m.detail = "time budget exhausted";
  double t = 0.0;

  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    // sensing
    std::vector<ObstacleTracker::Detection> dets;
    for (const auto& p : peds)
      dets.push_back({p.id, p.position + c.sensing_noise * Vec2(noise(noise_rng), noise(noise_rng)), p.a, p.b});
    tracker.update(dets, dt);
    OccupancyGrid sensed = map;
    for (const auto& p : peds) sensed.fill_ellipse(p.position, p.psi, p.a, p.b, true);

    TrajectoryRow row;
    row.t = t;
    if (planner) {
      WorldSnapshot<Model> world;
      world.state = x;
      world.previous_command = command;
      world.grid = &sensed;
      world.obstacles = tracker.obstacles();
      world.dt = dt;
      const auto out = planner->control_cycle(world);
      command = out.command;
      row.solve_ms = out.stats.cycle_ms;
      row.status = to_string(out.stats.status);
      if (out.stats.braking) ++m.braking_cycles;
      if (out.stats.status == SolveStatus::infeasible) ++m.infeasible_cycles;
      if (out.stats.status == SolveStatus::max_iter) ++m.max_iter_cycles;
      if (c.planner == PlannerKind::lmpcc &&
          (!out.stats.eta_ok || out.stats.required_length > out.stats.local_length))
        ++m.eta_violations;
      if (m.cold_iterations < 0) m.cold_iterations = out.stats.iterations;
      res.last_regions = out.regions;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      const ClearanceMap cmap(sensed);
      UnicycleModel::State xu;
      xu << x(0), x(1), x(2), 0.0;
      const auto choice = dw->step(xu, executed, cmap, dt);
      if constexpr (std::is_same_v<Model, UnicycleModel>) command = choice.command;
      row.solve_ms = lmpcc::detail::elapsed_ms(t0);
      row.status = choice.admissible ? "dw" : "dw_stop";
    }
    if (!opt.record_timing) row.solve_ms = 0.0;
    m.solve_ms.push_back(row.solve_ms);

    // apply the command
    const Vec2 before(x(0), x(1));
    x = step_dynamics(model, x, command, dt).next;
    x(2) = wrap_angle(x(2));
    if constexpr (std::is_same_v<Model, UnicycleModel>) {
      row.v = command(0);
      row.omega = command(1);
    } else {
      row.v = x(Model::kSpeedState);
      row.omega = x(Model::kSpeedState) * std::tan(command(1)) / model.wheelbase;
    }
    executed << row.v, row.omega;
    const Vec2 pos(x(0), x(1));
    m.traveled += (pos - before).norm();
    social_forces_step(peds, pos, c.footprint.r_disc, t, dt, c.social);
    t += dt;
    ++m.cycles;
    for (std::size_t i = 0; i < peds.size(); ++i) res.pedestrian_tracks[i].push_back(peds[i].position);

    progress = estimate_theta0(path, pos, progress).theta;
    row.x = pos.x();
    row.y = pos.y();
    row.psi = x(2);
    row.theta = progress;
    row.contour_error = signed_offset(path, pos, progress);
    row.clearance = min_clearance(pos, x(2), c.footprint, peds);
    if (std::isfinite(row.clearance)) {
      m.min_clearance = std::min(m.min_clearance, row.clearance);
      clear_sum += row.clearance;
      ++clear_count;
    }
    if (opt.keep_log) res.log.push_back(row);

    const auto contact = check_collision(pos, x(2), c.footprint, &map, peds);
    if (contact != Contact::none) {
      m.outcome = Outcome::collision;
      m.detail = contact == Contact::static_obstacle ? "static obstacle" : "pedestrian";
      break;
    }
    if (progress >= total - 0.5 && (pos - goal).norm() < c.goal_tolerance) {
      m.outcome = Outcome::success;
      m.detail = "goal reached";
      break;
    }
    history.emplace_back(t, progress);
    while (history.size() > 1 && t - history[1].first >= c.stuck_window - 1e-9) history.pop_front();
    if (t - history.front().first >= c.stuck_window - 1e-9 &&
        progress - history.front().second < c.stuck_progress) {
      m.outcome = Outcome::stuck;
      m.detail = "no progress";
      break;
    }
  }
  m.duration = t;
  m.final_theta = progress;
  m.mean_clearance = clear_count > 0 ? clear_sum / clear_count : std::numeric_limits<double>::infinity();
  return res;
}

}  // namespace detail

inline RunResult run_scenario(const ScenarioConfig& c, const RunOptions& opt = {}) {
  if (c.model == "bicycle") {
    BicycleModel bm;
    bm.wheelbase = c.wheelbase;
    return detail::run_model(c, bm, opt);
  }
  return detail::run_model(c, UnicycleModel{}, opt);
}

inline std::string format_number(double v, int precision = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline void write_trajectory_csv(std::ostream& out, const RunResult& r) {
  out << "t,x,y,psi,v,omega,theta,solve_ms,status,clearance\n";
  for (const auto& row : r.log)
    out << format_number(row.t, 3) << ',' << format_number(row.x) << ',' << format_number(row.y) << ','
        << format_number(row.psi) << ',' << format_number(row.v) << ',' << format_number(row.omega) << ','
        << format_number(row.theta) << ',' << format_number(row.solve_ms, 3) << ',' << row.status << ','
        << format_number(row.clearance) << '\n';
}

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const auto j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

inline json metrics_json(const RunResult& r) {
  const auto& m = r.metrics;
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  json j;
  j["outcome"] = to_string(m.outcome);
  j["detail"] = m.detail;
  j["min_clearance"] = num(m.min_clearance);
  j["mean_clearance"] = num(m.mean_clearance);
  j["traveled"] = m.traveled;
  j["duration"] = m.duration;
  j["cycles"] = m.cycles;
  j["eta_violations"] = m.eta_violations;
  j["infeasible_cycles"] = m.infeasible_cycles;
  j["braking_cycles"] = m.braking_cycles;
  j["max_iter_cycles"] = m.max_iter_cycles;
  j["solve_ms"] = {{"median", num(percentile(m.solve_ms, 50))},
                   {"p99", num(percentile(m.solve_ms, 99))},
                   {"max", num(m.solve_ms.empty() ? 0.0 : *std::max_element(m.solve_ms.begin(), m.solve_ms.end()))}};
  j["config"] = r.config;
  return j;
}

/// gnuplot data: blocks separated by two blank lines (index 0: reference,
/// 1: executed path, 2: regions of the last cycle, 3..: pedestrian tracks).
inline void write_plot_data(std::ostream& out, const RunResult& r) {
  out << "# reference path\n";
  for (const auto& p : r.reference) out << format_number(p.x()) << ' ' << format_number(p.y()) << '\n';
  out << "\n\n# executed path\n";
  for (const auto& row : r.log) out << format_number(row.x) << ' ' << format_number(row.y) << '\n';
  out << "\n\n# free-space regions (last cycle)\n";
  for (const auto& reg : r.last_regions) {
    const auto cs = reg.corners();
    for (int i = 0; i <= 4; ++i) out << format_number(cs[i % 4].x()) << ' ' << format_number(cs[i % 4].y()) << '\n';
    out << '\n';
  }
  for (std::size_t i = 0; i < r.pedestrian_tracks.size(); ++i) {
    out << "\n\n# pedestrian " << i << '\n';
    for (const auto& p : r.pedestrian_tracks[i]) out << format_number(p.x()) << ' ' << format_number(p.y()) << '\n';
  }
}

}  // namespace lmpcc::sim
