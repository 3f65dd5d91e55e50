#pragma once

// Helbing-style social forces for simulated pedestrians.

#include "lmpcc/common.hpp"

#include <optional>
#include <vector>

namespace lmpcc::sim {

struct Pedestrian {
  int id{0};
  Vec2 position{0.0, 0.0};
  Vec2 velocity{0.0, 0.0};
  std::vector<Vec2> goals;  // visited in order; cycled when patrolling
  std::size_t goal_index{0};
  bool patrol{false};
  double desired_speed{1.0};
  double depart_time{0.0};
  double a{0.3};
  double b{0.2};
  double psi{0.0};  // orientation of the a axis
  bool arrived{false};

  Vec2 goal() const { return goals.empty() ? position : goals[goal_index]; }
};

struct SocialForceParams {
  double relaxation{0.5};   // s
  double amplitude{2.0};    // m/s^2
  double range{0.4};        // m
  double speed_cap{1.4};    // m/s
  double goal_tolerance{0.2};
  bool cooperative{true};   // robot repels pedestrians
  bool minor_axis_along_velocity{true};
};

namespace detail {
inline double body_radius(const Pedestrian& p) { return p.a; }
}  // namespace detail

/// Advances every pedestrian by dt with semi-implicit Euler. The robot acts as
/// a disc of radius robot_radius when the model is cooperative.
inline void social_forces_step(std::vector<Pedestrian>& peds, std::optional<Vec2> robot,
                               double robot_radius, double time, double dt,
                               const SocialForceParams& prm = {}) {
  if (!(dt > 0.0)) throw InvalidInput("social_forces_step: dt must be > 0");
  std::vector<Vec2> accel(peds.size(), Vec2::Zero());
  for (std::size_t i = 0; i < peds.size(); ++i) {
    auto& p = peds[i];
    if (time < p.depart_time || p.arrived) continue;
    Vec2 to_goal = p.goal() - p.position;
    const double dist = to_goal.norm();
    Vec2 desired = Vec2::Zero();
    if (dist > 1e-9) desired = to_goal / dist * std::min(p.desired_speed, dist / prm.relaxation);
    Vec2 f = (desired - p.velocity) / prm.relaxation;
    auto repel = [&](Vec2 other, double radius) {
      const Vec2 d = p.position - other;
      const double n = d.norm();
      const Vec2 dir = n < 1e-9 ? Vec2(0.0, 1.0) : Vec2(d / n);
      f += prm.amplitude * std::exp((radius + detail::body_radius(p) - n) / prm.range) * dir;
    };
    for (std::size_t j = 0; j < peds.size(); ++j)
      if (j != i && time >= peds[j].depart_time) repel(peds[j].position, detail::body_radius(peds[j]));
    if (prm.cooperative && robot) repel(*robot, robot_radius);
    accel[i] = f;
  }
  for (std::size_t i = 0; i < peds.size(); ++i) {
    auto& p = peds[i];
    if (time < p.depart_time || p.arrived) {
      p.velocity.setZero();
      continue;
    }
    p.velocity += dt * accel[i];
    const double sp = p.velocity.norm();
    if (sp > prm.speed_cap) p.velocity *= prm.speed_cap / sp;
    p.position += dt * p.velocity;
    if (p.velocity.norm() > 0.05) {
      const double h = std::atan2(p.velocity.y(), p.velocity.x());
      p.psi = prm.minor_axis_along_velocity ? wrap_angle(h + 0.5 * kPi) : h;
    }
    if ((p.goal() - p.position).norm() < prm.goal_tolerance) {
      if (p.patrol && p.goals.size() > 1) {
        p.goal_index = (p.goal_index + 1) % p.goals.size();
      } else if (p.goal_index + 1 < p.goals.size()) {
        ++p.goal_index;
      } else {
        p.arrived = true;
        p.velocity.setZero();
      }
    }
  }
}

}  // namespace lmpcc::sim
