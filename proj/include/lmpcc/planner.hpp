#pragma once

// One control cycle of the local contouring controller: progress estimate,
// local reference, free-space regions, obstacle forecasts, solve, and the
// deceleration fallback.

#include "lmpcc/mpcc_solver.hpp"

#include <chrono>
#include <optional>

namespace lmpcc {

struct PlannerConfig {
  double tau{0.2};
  int horizon{15};
  double epsilon{0.02};
  Weights weights{};
  VehicleLimits limits{};
  Footprint footprint{};
  SearchParams search{};
  SolverOptions solver{};
  PredictionOptions prediction{};
  std::size_t max_obstacles{6};
  double brake_factor{0.8};
  CostMode mode{CostMode::contouring};
  double track_lookahead{1.0};  // tracking mode: farthest target ahead of the robot (m)
  bool static_constraints{true};
  bool dynamic_constraints{true};
  bool lateral_search{true};  // re-seed sideways when a region is blocked ahead
  LateralSearch lateral{};
};

template <class Model>
struct WorldSnapshot {
  typename Model::State state = Model::State::Zero();  // path-parameter entry ignored
  typename Model::Input previous_command = Model::Input::Zero();
  const OccupancyGrid* grid{nullptr};
  std::vector<EllipseObstacle> obstacles;
  double dt{0.05};  // time since the previous cycle
};

struct CycleStats {
  SolveStatus status{SolveStatus::max_iter};
  int iterations{0};
  double kkt{0.0};
  double solve_ms{0.0};
  double cycle_ms{0.0};
  double theta0{0.0};
  std::size_t segment{0};
  std::size_t eta{0};
  bool eta_ok{true};
  double local_length{0.0};     // length of segments m+1 .. m+eta
  double required_length{0.0};  // tau * N * v_max
  bool braking{false};
};

template <class Model>
struct CycleResult {
  typename Model::Input command;
  HorizonPlan<Model> plan;
  CycleStats stats;
  std::vector<ConvexRegion> regions;
  std::vector<ObstaclePrediction> predictions;
};

template <class Model>
class LmpccPlanner {
 public:
  using State = typename Model::State;
  using Input = typename Model::Input;

  /// The path is extended straight past its end by one horizon of travel at
  /// maximum speed. A robot that overruns the end gets further extensions.
  LmpccPlanner(const ReferencePath& path, PlannerConfig config, Model model = {})
      : config_(std::move(config)), model_(model), goal_theta_(path.total_length()) {
    if (config_.horizon < 1 || !(config_.tau > 0.0)) throw InvalidInput("LmpccPlanner: bad horizon");
    if (!(config_.brake_factor >= 0.0 && config_.brake_factor < 1.0))
      throw InvalidInput("LmpccPlanner: brake factor must be in [0, 1)");
    path_ = path.extended(config_.tau * config_.horizon * config_.limits.v_max);
  }

  const ReferencePath& path() const { return path_; }
  const PlannerConfig& config() const { return config_; }
  double goal_theta() const { return goal_theta_; }
  std::optional<double> theta() const { return theta_; }
  const std::optional<HorizonPlan<Model>>& last_plan() const { return last_plan_; }

  void reset() {
    theta_.reset();
    last_plan_.reset();
    side_ = 0;
  }

  CycleResult<Model> control_cycle(const WorldSnapshot<Model>& world) {
    const auto t0 = std::chrono::steady_clock::now();
    CycleResult<Model> out;
    const int N = config_.horizon;
    const double tau = config_.tau;
    State x = world.state;
    const Vec2 p(x(0), x(1));

    // progress and local reference
    const double reach = tau * N * config_.limits.v_max;
    auto est = estimate_theta0(path_, p, theta_);
    while (est.segment + 1 >= path_.segment_count()) {
      path_ = path_.extended(reach);
      est = estimate_theta0(path_, p, theta_);
    }
    theta_ = est.theta;
    x(Model::kTheta) = est.theta;
    const auto sel = select_eta(path_, est.segment, N, tau, config_.limits.v_max);
    const LocalReference ref(path_, est.segment, sel.eta, config_.epsilon);
    out.stats.theta0 = est.theta;
    out.stats.segment = est.segment;
    out.stats.eta = sel.eta;
    out.stats.eta_ok = sel.sufficient;
    out.stats.local_length = sel.covered;
    out.stats.required_length = reach;

    // warm start and seeds
    std::optional<HorizonPlan<Model>> warm;
    if (last_plan_) warm = shift_plan(*last_plan_, x, world.dt / tau, model_, tau);
    std::vector<Vec2> seed;
    if (warm)
      seed = warm->positions();
    else
      seed.assign(static_cast<std::size_t>(N) + 1, p);

    SolverProblem<Model> pb;
    pb.model = model_;
    pb.x0 = x;
    pb.tau = tau;
    pb.horizon = N;
    pb.mode = config_.mode;
    pb.reference = &ref;
    pb.v_ref = ref.v_ref();
    pb.weights = config_.weights;
    pb.limits = config_.limits;
    pb.footprint = config_.footprint;
    pb.options = config_.solver;

    if (config_.mode == CostMode::tracking) {
      for (int k = 0; k <= N; ++k)
        pb.track_targets.push_back(
            path_.position(est.theta + std::min(k * tau * pb.v_ref, config_.track_lookahead)));
      pb.weights.q_r = 0.0;
    } else {
      if (config_.static_constraints && world.grid) {
        OccupancyGrid local = *world.grid;
        std::vector<EllipseFootprint> erase;
        for (const auto& o : world.obstacles) erase.push_back({o.position, o.psi, o.a, o.b});
        if (!erase.empty()) erase_obstacles(local, erase);
        const auto headings = seed_orientations(seed, x(2));
        const double r = config_.footprint.r_disc;
        bool any_blocked = false;
        for (int k = 1; k <= N; ++k) {
          auto reg = region_with_fallback(local, seed[k], headings[k], p, r, config_.search);
          if (config_.lateral_search && !reg.degenerate && front_blocked(reg, r, config_.lateral)) {
            any_blocked = true;
            if (auto alt = lateral_side_search(local, reg.seed, headings[k], r)) reg = *alt;
          }
          out.regions.push_back(reg);
        }
        if (!any_blocked) side_ = 0;
        pb.regions = out.regions;
      }
      if (config_.dynamic_constraints) {
        const auto nearest = select_nearest(world.obstacles, p, config_.max_obstacles);
        for (const auto& o : nearest) {
          const auto& bound = cache_.get(o.a, o.b, config_.footprint.r_disc);
          out.predictions.push_back(
              predict_horizon(o.position, o.velocity, o, N, tau, bound, config_.prediction));
        }
        pb.predictions = out.predictions;
      } else {
        pb.weights.q_r = 0.0;
      }
    }

    out.plan = solve(pb, warm ? &*warm : nullptr);
    out.stats.status = out.plan.status;
    out.stats.iterations = out.plan.iterations;
    out.stats.kkt = out.plan.kkt;
    out.stats.solve_ms = out.plan.solve_ms;

    if (out.plan.status == SolveStatus::infeasible) {
      out.stats.braking = true;
      out.command = model_.brake(world.previous_command, x, config_.brake_factor);
      out.command = out.command.cwiseMax(model_.input_lower(config_.limits))
                        .cwiseMin(model_.input_upper(config_.limits));
      if (warm) last_plan_ = *warm;
    } else {
      out.command = out.plan.inputs.front();
      last_plan_ = out.plan;
    }
    out.stats.cycle_ms = detail::elapsed_ms(t0);
    return out;
  }

 private:
  PlannerConfig config_;
  Model model_;
  ReferencePath path_;
  double goal_theta_;
  std::optional<double> theta_;
  std::optional<HorizonPlan<Model>> last_plan_;
  EnlargementCache cache_;
  int side_{0};  // side chosen by the lateral search, 0 while nothing is blocked

  /// Keeps passing on the side chosen first; picks the side that opens up
  /// with the smaller shift (right on ties) when none is chosen yet.
  std::optional<ConvexRegion> lateral_side_search(const OccupancyGrid& grid, Vec2 seed, double heading,
                                                  double r) {
    if (side_ != 0) return lateral_region_search(grid, seed, heading, r, side_, config_.search, config_.lateral);
    const auto right = lateral_region_search(grid, seed, heading, r, -1, config_.search, config_.lateral);
    const auto left = lateral_region_search(grid, seed, heading, r, +1, config_.search, config_.lateral);
    auto shift = [&](const ConvexRegion& reg) { return (reg.seed - seed).norm(); };
    if (right && (!left || shift(*right) <= shift(*left))) {
      side_ = -1;
      return right;
    }
    if (left) side_ = +1;
    return left;
  }
};

}  // namespace lmpcc
