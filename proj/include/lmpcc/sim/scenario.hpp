#pragma once

// Scenario description: map, path, robot, pedestrians, planner settings.
// JSON in, JSON out (the echo is the fully resolved configuration).

#include "lmpcc/obstacle_tracking.hpp"
#include "lmpcc/planner.hpp"
#include "lmpcc/sim/dynamic_window.hpp"
#include "lmpcc/sim/social_forces.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace lmpcc::sim {

using json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PlannerKind { lmpcc, dw, mpc_track };

inline std::string to_string(PlannerKind p) {
  switch (p) {
    case PlannerKind::lmpcc: return "lmpcc";
    case PlannerKind::dw: return "dw";
    default: return "mpc_track";
  }
}

inline PlannerKind planner_from_string(const std::string& s) {
  if (s == "lmpcc") return PlannerKind::lmpcc;
  if (s == "dw") return PlannerKind::dw;
  if (s == "mpc_track") return PlannerKind::mpc_track;
  throw ConfigError("unknown planner '" + s + "' (expected lmpcc, dw or mpc_track)");
}

struct Box {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{0.0, 0.0};
};

struct MapSpec {
  std::string file;  // empty: generated
  double resolution{0.05};
  Vec2 origin{0.0, 0.0};
  Vec2 size{10.0, 10.0};  // generated maps, metres
  bool border{true};
  std::vector<Box> boxes;
};

struct PedestrianSpec {
  Vec2 start{0.0, 0.0};
  std::vector<Vec2> goals;
  double speed{1.0};
  double depart{0.0};
  bool patrol{false};
  double a{0.3};
  double b{0.2};
};

struct RandomPedestrians {
  int count{0};
  Vec2 start_x{0.0, 0.0}, start_y{0.0, 0.0};
  Vec2 goal_x{0.0, 0.0}, goal_y{0.0, 0.0};
  Vec2 speed{0.8, 1.2};
  Vec2 depart{0.0, 0.0};
  double swap_probability{0.0};  // chance that start and goal regions are exchanged
  double min_spacing{1.0};
  double keep_clear{1.5};  // minimum start distance from the robot
  bool patrol{false};
  double a{0.3};
  double b{0.2};
};

struct PathSpec {
  std::string type{"waypoints"};  // waypoints | figure8
  std::vector<Vec2> waypoints;
  double ax{4.0}, ay{2.0};
  int samples{33};
  double v_ref{1.0};
};

struct ScenarioConfig {
  std::string name{"scenario"};
  MapSpec map;
  PathSpec path;
  std::string model{"unicycle"};
  Eigen::Vector3d start{0.0, 0.0, 0.0};
  double start_speed{0.0};
  double wheelbase{2.7};
  Footprint footprint;
  VehicleLimits limits;
  Weights weights;
  double tau{0.2};
  int steps{15};
  double epsilon{0.02};
  std::vector<PedestrianSpec> pedestrians;
  RandomPedestrians random_pedestrians;
  SocialForceParams social;
  double sensing_noise{0.02};
  KalmanParams kalman;
  double time_budget{60.0};
  double control_period{0.05};
  double goal_tolerance{0.3};
  double stuck_window{10.0};
  double stuck_progress{0.05};
  std::uint64_t seed{1};
  PlannerKind planner{PlannerKind::lmpcc};
  SolverOptions solver;
  SearchParams search;
  PredictionOptions prediction;
  DynamicWindowParams dw;
  double track_lookahead{1.0};
  std::string base_dir{"."};  // for relative map paths

  double horizon_seconds() const { return tau * steps; }
};

namespace detail {

inline Vec2 vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}
inline json to_j(Vec2 v) { return json::array({v.x(), v.y()}); }

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
inline void read_vec(const json& j, const char* key, Vec2& out) {
  if (j.contains(key)) out = vec2(j.at(key));
}

inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Line of the first occurrence of "key" in the document, 0 if absent.
inline int key_line(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return line_col(text, pos).first;
}

}  // namespace detail

inline ScenarioConfig config_from_json(const json& j) {
  using namespace detail;
  ScenarioConfig c;
  read(j, "name", c.name);
  if (j.contains("map")) {
    const auto& m = j.at("map");
    read(m, "file", c.map.file);
    read(m, "resolution", c.map.resolution);
    read_vec(m, "origin", c.map.origin);
    read_vec(m, "size", c.map.size);
    read(m, "border", c.map.border);
    if (m.contains("boxes"))
      for (const auto& b : m.at("boxes")) {
        if (!b.is_array() || b.size() != 4) throw ConfigError("map.boxes: expected [x0, y0, x1, y1]");
        c.map.boxes.push_back({Vec2(b[0].get<double>(), b[1].get<double>()),
                               Vec2(b[2].get<double>(), b[3].get<double>())});
      }
  }
  if (!j.contains("path")) throw ConfigError("missing 'path'");
  {
    const auto& p = j.at("path");
    read(p, "type", c.path.type);
    if (p.contains("waypoints"))
      for (const auto& w : p.at("waypoints")) c.path.waypoints.push_back(vec2(w));
    read(p, "ax", c.path.ax);
    read(p, "ay", c.path.ay);
    read(p, "samples", c.path.samples);
    read(p, "v_ref", c.path.v_ref);
    if (c.path.type != "waypoints" && c.path.type != "figure8")
      throw ConfigError("path.type must be 'waypoints' or 'figure8'");
  }
  if (j.contains("robot")) {
    const auto& r = j.at("robot");
    read(r, "model", c.model);
    if (r.contains("start")) {
      const auto& s = r.at("start");
      if (!s.is_array() || s.size() != 3) throw ConfigError("robot.start: expected [x, y, psi]");
      c.start = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    }
    read(r, "start_speed", c.start_speed);
    read(r, "wheelbase", c.wheelbase);
    if (r.contains("footprint")) {
      const auto& f = r.at("footprint");
      if (f.contains("length")) {
        c.footprint = Footprint::covering(f.at("length").get<double>(), f.at("width").get<double>(),
                                          f.value("discs", 1));
      } else {
        c.footprint.offsets.clear();
        for (const auto& o : f.at("offsets")) c.footprint.offsets.push_back(vec2(o));
        c.footprint.r_disc = f.at("r_disc").get<double>();
      }
    }
    if (c.model != "unicycle" && c.model != "bicycle")
      throw ConfigError("robot.model must be 'unicycle' or 'bicycle'");
  }
  if (j.contains("limits")) {
    const auto& l = j.at("limits");
    read(l, "v_min", c.limits.v_min);
    read(l, "v_max", c.limits.v_max);
    read(l, "omega_max", c.limits.omega_max);
    read(l, "accel_max", c.limits.accel_max);
    read(l, "steer_max", c.limits.steer_max);
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (w.contains("q_eps")) c.weights.q_eps = vec2(w.at("q_eps")).asDiagonal();
    read(w, "q_v", c.weights.q_v);
    read(w, "q_r", c.weights.q_r);
    if (w.contains("q_u")) c.weights.q_u = vec2(w.at("q_u")).asDiagonal();
    read(w, "gamma", c.weights.gamma);
    read(w, "q_track", c.weights.q_track);
  }
  if (j.contains("horizon")) {
    const auto& h = j.at("horizon");
    read(h, "tau", c.tau);
    read(h, "steps", c.steps);
    if (h.contains("seconds")) c.steps = static_cast<int>(std::lround(h.at("seconds").get<double>() / c.tau));
    read(h, "epsilon", c.epsilon);
  }
  if (j.contains("pedestrians"))
    for (const auto& p : j.at("pedestrians")) {
      PedestrianSpec s;
      s.start = vec2(p.at("start"));
      if (p.contains("goal")) s.goals.push_back(vec2(p.at("goal")));
      if (p.contains("goals"))
        for (const auto& g : p.at("goals")) s.goals.push_back(vec2(g));
      read(p, "speed", s.speed);
      read(p, "depart", s.depart);
      read(p, "patrol", s.patrol);
      read(p, "a", s.a);
      read(p, "b", s.b);
      c.pedestrians.push_back(s);
    }
  if (j.contains("random_pedestrians")) {
    const auto& r = j.at("random_pedestrians");
    auto& rp = c.random_pedestrians;
    read(r, "count", rp.count);
    read_vec(r, "start_x", rp.start_x);
    read_vec(r, "start_y", rp.start_y);
    read_vec(r, "goal_x", rp.goal_x);
    read_vec(r, "goal_y", rp.goal_y);
    read_vec(r, "speed", rp.speed);
    read_vec(r, "depart", rp.depart);
    read(r, "swap_probability", rp.swap_probability);
    read(r, "min_spacing", rp.min_spacing);
    read(r, "keep_clear", rp.keep_clear);
    read(r, "patrol", rp.patrol);
    read(r, "a", rp.a);
    read(r, "b", rp.b);
  }
  if (j.contains("social_forces")) {
    const auto& s = j.at("social_forces");
    read(s, "relaxation", c.social.relaxation);
    read(s, "amplitude", c.social.amplitude);
    read(s, "range", c.social.range);
    read(s, "speed_cap", c.social.speed_cap);
    read(s, "goal_tolerance", c.social.goal_tolerance);
    read(s, "cooperative", c.social.cooperative);
  }
  if (j.contains("sensing")) {
    const auto& s = j.at("sensing");
    read(s, "noise", c.sensing_noise);
    read(s, "accel_std", c.kalman.accel_std);
    read(s, "meas_std", c.kalman.meas_std);
    read(s, "init_vel_std", c.kalman.init_vel_std);
    read(s, "minor_axis_along_velocity", c.prediction.minor_axis_along_velocity);
  }
  c.social.minor_axis_along_velocity = c.prediction.minor_axis_along_velocity;
  read(j, "time_budget", c.time_budget);
  read(j, "control_period", c.control_period);
  read(j, "goal_tolerance", c.goal_tolerance);
  read(j, "stuck_window", c.stuck_window);
  read(j, "stuck_progress", c.stuck_progress);
  read(j, "seed", c.seed);
  if (j.contains("planner")) c.planner = planner_from_string(j.at("planner").get<std::string>());
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    read(s, "max_iterations", c.solver.max_iterations);
    read(s, "kkt_tolerance", c.solver.kkt_tolerance);
    read(s, "rho", c.solver.rho);
    read(s, "dynamic_margin", c.solver.dynamic_margin);
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    read(s, "step", c.search.step);
    read(s, "max_distance", c.search.max_distance);
  }
  if (j.contains("dynamic_window")) {
    const auto& d = j.at("dynamic_window");
    read(d, "v_accel", c.dw.v_accel);
    read(d, "w_accel", c.dw.w_accel);
    read(d, "v_samples", c.dw.v_samples);
    read(d, "w_samples", c.dw.w_samples);
    read(d, "horizon", c.dw.horizon);
    read(d, "heading_weight", c.dw.heading_weight);
    read(d, "clearance_weight", c.dw.clearance_weight);
    read(d, "velocity_weight", c.dw.velocity_weight);
    read(d, "waypoint_switch", c.dw.waypoint_switch);
  }
  read(j, "track_lookahead", c.track_lookahead);

  if (!(c.tau > 0.0) || c.steps < 1) throw ConfigError("horizon: tau must be > 0 and steps >= 1");
  if (!(c.control_period > 0.0)) throw ConfigError("control_period must be > 0");
  if (!(c.map.resolution > 0.0)) throw ConfigError("map.resolution must be > 0");
  if (!(c.path.v_ref > 0.0)) throw ConfigError("path.v_ref must be > 0");
  for (const auto& p : c.pedestrians)
    if (p.a < p.b || !(p.b > 0.0)) throw ConfigError("pedestrian axes must satisfy a >= b > 0");
  return c;
}

inline json config_to_json(const ScenarioConfig& c) {
  using detail::to_j;
  json j;
  j["name"] = c.name;
  json m;
  if (!c.map.file.empty()) m["file"] = c.map.file;
  m["resolution"] = c.map.resolution;
  m["origin"] = to_j(c.map.origin);
  m["size"] = to_j(c.map.size);
  m["border"] = c.map.border;
  m["boxes"] = json::array();
  for (const auto& b : c.map.boxes) m["boxes"].push_back({b.lo.x(), b.lo.y(), b.hi.x(), b.hi.y()});
  j["map"] = m;
  json p;
  p["type"] = c.path.type;
  if (c.path.type == "figure8") {
    p["ax"] = c.path.ax;
    p["ay"] = c.path.ay;
    p["samples"] = c.path.samples;
  } else {
    p["waypoints"] = json::array();
    for (const auto& w : c.path.waypoints) p["waypoints"].push_back(to_j(w));
  }
  p["v_ref"] = c.path.v_ref;
  j["path"] = p;
  json r;
  r["model"] = c.model;
  r["start"] = {c.start.x(), c.start.y(), c.start.z()};
  r["start_speed"] = c.start_speed;
  r["wheelbase"] = c.wheelbase;
  json f;
  f["offsets"] = json::array();
  for (const auto& o : c.footprint.offsets) f["offsets"].push_back(to_j(o));
  f["r_disc"] = c.footprint.r_disc;
  r["footprint"] = f;
  j["robot"] = r;
  j["limits"] = {{"v_min", c.limits.v_min},
                 {"v_max", c.limits.v_max},
                 {"omega_max", c.limits.omega_max},
                 {"accel_max", c.limits.accel_max},
                 {"steer_max", c.limits.steer_max}};
  j["weights"] = {{"q_eps", {c.weights.q_eps(0, 0), c.weights.q_eps(1, 1)}},
                  {"q_v", c.weights.q_v},
                  {"q_r", c.weights.q_r},
                  {"q_u", {c.weights.q_u(0, 0), c.weights.q_u(1, 1)}},
                  {"gamma", c.weights.gamma},
                  {"q_track", c.weights.q_track}};
  j["horizon"] = {{"tau", c.tau}, {"steps", c.steps}, {"seconds", c.horizon_seconds()}, {"epsilon", c.epsilon}};
  j["pedestrians"] = json::array();
  for (const auto& s : c.pedestrians) {
    json q;
    q["start"] = to_j(s.start);
    q["goals"] = json::array();
    for (const auto& g : s.goals) q["goals"].push_back(to_j(g));
    q["speed"] = s.speed;
    q["depart"] = s.depart;
    q["patrol"] = s.patrol;
    q["a"] = s.a;
    q["b"] = s.b;
    j["pedestrians"].push_back(q);
  }
  const auto& rp = c.random_pedestrians;
  j["random_pedestrians"] = {{"count", rp.count},
                             {"start_x", to_j(rp.start_x)},
                             {"start_y", to_j(rp.start_y)},
                             {"goal_x", to_j(rp.goal_x)},
                             {"goal_y", to_j(rp.goal_y)},
                             {"speed", to_j(rp.speed)},
                             {"depart", to_j(rp.depart)},
                             {"swap_probability", rp.swap_probability},
                             {"min_spacing", rp.min_spacing},
                             {"keep_clear", rp.keep_clear},
                             {"patrol", rp.patrol},
                             {"a", rp.a},
                             {"b", rp.b}};
  j["social_forces"] = {{"relaxation", c.social.relaxation},
                        {"amplitude", c.social.amplitude},
                        {"range", c.social.range},
                        {"speed_cap", c.social.speed_cap},
                        {"goal_tolerance", c.social.goal_tolerance},
                        {"cooperative", c.social.cooperative}};
  j["sensing"] = {{"noise", c.sensing_noise},
                  {"accel_std", c.kalman.accel_std},
                  {"meas_std", c.kalman.meas_std},
                  {"init_vel_std", c.kalman.init_vel_std},
                  {"minor_axis_along_velocity", c.prediction.minor_axis_along_velocity}};
  j["time_budget"] = c.time_budget;
  j["control_period"] = c.control_period;
  j["goal_tolerance"] = c.goal_tolerance;
  j["stuck_window"] = c.stuck_window;
  j["stuck_progress"] = c.stuck_progress;
  j["seed"] = c.seed;
  j["planner"] = to_string(c.planner);
  j["solver"] = {{"max_iterations", c.solver.max_iterations},
                 {"kkt_tolerance", c.solver.kkt_tolerance},
                 {"rho", c.solver.rho},
                 {"dynamic_margin", c.solver.dynamic_margin}};
  j["search"] = {{"step", c.search.step}, {"max_distance", c.search.max_distance}};
  j["dynamic_window"] = {{"v_accel", c.dw.v_accel},
                         {"w_accel", c.dw.w_accel},
                         {"v_samples", c.dw.v_samples},
                         {"w_samples", c.dw.w_samples},
                         {"horizon", c.dw.horizon},
                         {"heading_weight", c.dw.heading_weight},
                         {"clearance_weight", c.dw.clearance_weight},
                         {"velocity_weight", c.dw.velocity_weight},
                         {"waypoint_switch", c.dw.waypoint_switch}};
  j["track_lookahead"] = c.track_lookahead;
  return j;
}

/// Parses a JSON document; errors carry "<source>:<line>:<col>" context.
inline ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const ConfigError& e) {
    // point at the first key named in the message, when there is one
    std::string msg = e.what();
    const auto q = msg.find_first_of(".' ");
    const std::string key = msg.substr(0, q);
    const int line = detail::key_line(text, key);
    throw ConfigError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + msg);
  } catch (const InvalidInput& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto c = parse_config(ss.str(), path);
  c.base_dir = std::filesystem::path(path).parent_path().string();
  if (c.base_dir.empty()) c.base_dir = ".";
  return c;
}

/// Waypoints of the configured path.
inline std::vector<Vec2> path_waypoints(const ScenarioConfig& c) {
  if (c.path.type == "figure8") {
    std::vector<Vec2> w;
    const int n = std::max(c.path.samples, 5);
    for (int i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * i / (n - 1);
      w.emplace_back(c.path.ax * std::sin(t), c.path.ay * std::sin(2.0 * t));
    }
    return w;
  }
  return c.path.waypoints;
}

inline ReferencePath build_path(const ScenarioConfig& c) {
  const auto w = path_waypoints(c);
  const std::vector<double> v{c.path.v_ref};
  return fit_segments(w, v);
}

/// Static map: a grid file (resolved against the config's directory) or a
/// generated rectangle with optional border and boxes.
inline OccupancyGrid build_map(const ScenarioConfig& c) {
  if (!c.map.file.empty()) {
    std::filesystem::path p(c.map.file);
    if (p.is_relative()) p = std::filesystem::path(c.base_dir) / p;
    auto g = load_grid(p.string(), c.map.resolution, c.map.origin);
    for (const auto& b : c.map.boxes) g.fill_box(b.lo, b.hi);
    return g;
  }
  const int w = static_cast<int>(std::lround(c.map.size.x() / c.map.resolution));
  const int h = static_cast<int>(std::lround(c.map.size.y() / c.map.resolution));
  OccupancyGrid g(c.map.resolution, c.map.origin, w, h);
  if (c.map.border) {
    for (int x = 0; x < w; ++x) g.set(x, 0, true), g.set(x, h - 1, true);
    for (int y = 0; y < h; ++y) g.set(0, y, true), g.set(w - 1, y, true);
  }
  for (const auto& b : c.map.boxes) g.fill_box(b.lo, b.hi);
  return g;
}

/// Configured pedestrians followed by the seeded random ones.
inline std::vector<Pedestrian> build_pedestrians(const ScenarioConfig& c, std::uint64_t seed) {
  std::vector<Pedestrian> out;
  int id = 0;
  auto make = [&](Vec2 start, std::vector<Vec2> goals, double speed, double depart, bool patrol, double a,
                  double b) {
    Pedestrian p;
    p.id = id++;
    p.position = start;
    p.goals = std::move(goals);
    p.patrol = patrol;
    if (patrol) p.goals.push_back(start);
    p.desired_speed = speed;
    p.depart_time = depart;
    p.a = a;
    p.b = b;
    const Vec2 d = p.goal() - start;
    const double h = d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : 0.0;
    p.psi = c.prediction.minor_axis_along_velocity ? wrap_angle(h + 0.5 * kPi) : h;
    out.push_back(std::move(p));
  };
  for (const auto& s : c.pedestrians) make(s.start, s.goals, s.speed, s.depart, s.patrol, s.a, s.b);

  const auto& rp = c.random_pedestrians;
  if (rp.count <= 0) return out;
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  auto uni = [&](Vec2 range) {
    return range.x() + (range.y() - range.x()) * std::generate_canonical<double, 53>(rng);
  };
  const Vec2 robot(c.start.x(), c.start.y());
  for (int k = 0; k < rp.count; ++k) {
    Vec2 start, goal;
    const bool swap = std::generate_canonical<double, 53>(rng) < rp.swap_probability;
    for (int attempt = 0; attempt < 200; ++attempt) {
      start = {uni(rp.start_x), uni(rp.start_y)};
      goal = {uni(rp.goal_x), uni(rp.goal_y)};
      if (swap) std::swap(start, goal);
      bool ok = (start - robot).norm() >= rp.keep_clear;
      for (const auto& p : out) ok = ok && (p.position - start).norm() >= rp.min_spacing;
      if (ok) break;
    }
    const double speed = uni(rp.speed);
    const double depart = uni(rp.depart);
    make(start, {goal}, speed, depart, rp.patrol, rp.a, rp.b);
  }
  return out;
}

}  // namespace lmpcc::sim
