#pragma once

// Dynamic Window baseline: samples (v, omega) reachable within one control
// period, forward-simulates each pair and scores heading, clearance and speed.

#include "lmpcc/dynamics.hpp"
#include "lmpcc/mpcc_solver.hpp"
#include "lmpcc/occupancy_grid.hpp"

#include <limits>
#include <vector>

namespace lmpcc::sim {

struct DynamicWindowParams {
  double v_accel{1.0};  // m/s^2
  double w_accel{2.0};  // rad/s^2
  int v_samples{8};
  int w_samples{21};
  double horizon{1.5};  // s
  double sim_dt{0.1};
  double heading_weight{1.0};
  double clearance_weight{0.4};
  double velocity_weight{0.6};
  double clearance_cap{1.5};
  double waypoint_switch{1.0};  // m
};

/// Clearance lookup built from the Euclidean distance field of a grid.
class ClearanceMap {
 public:
  explicit ClearanceMap(const OccupancyGrid& grid) : grid_(&grid), field_(grid.distance_field()) {}

  /// Lower bound on the distance from p to the nearest occupied cell boundary.
  double at(Vec2 p) const {
    const auto c = grid_->cell_of(p);
    if (!grid_->in_bounds(c[0], c[1])) return -1.0;
    const double d = field_[static_cast<std::size_t>(c[1]) * grid_->width() + c[0]];
    return d - std::sqrt(2.0) * grid_->resolution();
  }

 private:
  const OccupancyGrid* grid_;
  std::vector<double> field_;
};

struct DwChoice {
  UnicycleModel::Input command = UnicycleModel::Input::Zero();
  bool admissible{false};
  double clearance{0.0};  // minimum clearance of the chosen rollout
  double score{0.0};
};

class DynamicWindowPlanner {
 public:
  DynamicWindowPlanner(std::vector<Vec2> waypoints, DynamicWindowParams params, VehicleLimits limits,
                       Footprint footprint)
      : waypoints_(std::move(waypoints)), params_(params), limits_(limits), footprint_(std::move(footprint)) {
    if (waypoints_.empty()) throw InvalidInput("DynamicWindowPlanner: no waypoints");
    if (params_.v_samples < 1 || params_.w_samples < 1) throw InvalidInput("DynamicWindowPlanner: bad sampling");
  }

  Vec2 current_waypoint() const { return waypoints_[index_]; }
  std::size_t waypoint_index() const { return index_; }

  /// Minimum footprint clearance along the rollout of (v, omega) from x.
  double rollout_clearance(const UnicycleModel::State& x, double v, double w, const ClearanceMap& map) const {
    UnicycleModel::State s = x;
    double best = std::numeric_limits<double>::infinity();
    const int steps = static_cast<int>(std::lround(params_.horizon / params_.sim_dt));
    for (int i = 1; i <= steps; ++i) {
      s(0) += v * std::cos(s(2)) * params_.sim_dt;
      s(1) += v * std::sin(s(2)) * params_.sim_dt;
      s(2) += w * params_.sim_dt;
      for (const auto& off : footprint_.offsets)
        best = std::min(best, map.at(Vec2(s(0), s(1)) + rotation(s(2)) * off) - footprint_.r_disc);
    }
    return best;
  }

  /// One decision. `velocity` holds the currently executed (v, omega).
  DwChoice step(const UnicycleModel::State& x, const UnicycleModel::Input& velocity, const ClearanceMap& map,
                double dt) {
    const Vec2 p(x(0), x(1));
    while (index_ + 1 < waypoints_.size() && (waypoints_[index_] - p).norm() < params_.waypoint_switch) ++index_;
    const Vec2 goal = waypoints_[index_];

    const double v_lo = std::max(limits_.v_min, velocity(0) - params_.v_accel * dt);
    const double v_hi = std::min(limits_.v_max, velocity(0) + params_.v_accel * dt);
    const double w_lo = std::max(-limits_.omega_max, velocity(1) - params_.w_accel * dt);
    const double w_hi = std::min(limits_.omega_max, velocity(1) + params_.w_accel * dt);

    DwChoice best;
    best.score = -std::numeric_limits<double>::infinity();
    const double t = params_.horizon;
    for (int i = 0; i < params_.v_samples; ++i) {
      const double v = params_.v_samples == 1 ? v_hi : v_lo + (v_hi - v_lo) * i / (params_.v_samples - 1);
      for (int j = 0; j < params_.w_samples; ++j) {
        const double w = params_.w_samples == 1 ? 0.5 * (w_lo + w_hi)
                                                : w_lo + (w_hi - w_lo) * j / (params_.w_samples - 1);
        const double clear = rollout_clearance(x, v, w, map);
        if (!(clear > 0.0)) continue;
        if (v > std::sqrt(2.0 * clear * params_.v_accel)) continue;  // must be able to stop in time
        // pose at the end of the rollout
        const double psi = x(2) + w * t;
        Vec2 end;
        if (std::abs(w) < 1e-9)
          end = p + v * t * Vec2(std::cos(x(2)), std::sin(x(2)));
        else
          end = p + (v / w) * Vec2(std::sin(psi) - std::sin(x(2)), std::cos(x(2)) - std::cos(psi));
        const Vec2 to_goal = goal - end;
        const double err = std::abs(wrap_angle(std::atan2(to_goal.y(), to_goal.x()) - psi));
        const double score = params_.heading_weight * (1.0 - err / kPi) +
                             params_.clearance_weight * std::min(clear, params_.clearance_cap) / params_.clearance_cap +
                             params_.velocity_weight * v / std::max(limits_.v_max, 1e-9);
        if (score > best.score) {
          best.score = score;
          best.command << v, w;
          best.admissible = true;
          best.clearance = clear;
        }
      }
    }
    if (!best.admissible) best.command.setZero();
    return best;
  }

 private:
  std::vector<Vec2> waypoints_;
  DynamicWindowParams params_;
  VehicleLimits limits_;
  Footprint footprint_;
  std::size_t index_{0};
};

}  // namespace lmpcc::sim
