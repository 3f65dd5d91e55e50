#pragma once

// Collision referee: robot discs against the occupancy grid and the true
// (not enlarged) pedestrian ellipses.

#include "lmpcc/free_space.hpp"
#include "lmpcc/geometry_bounds.hpp"
#include "lmpcc/mpcc_solver.hpp"
#include "lmpcc/sim/social_forces.hpp"

#include <limits>
#include <span>

namespace lmpcc::sim {

enum class Contact { none, static_obstacle, pedestrian };

/// Smallest border-to-border distance between any robot disc and any
/// pedestrian ellipse; +inf with no pedestrians.
inline double min_clearance(Vec2 position, double heading, const Footprint& fp,
                            std::span<const Pedestrian> peds) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& off : fp.offsets) {
    const Vec2 c = disc_center(position, heading, off);
    for (const auto& p : peds)
      best = std::min(best, disc_ellipse_clearance(c, fp.r_disc, p.position, p.psi,
                                                   EllipseShape::normalized(p.a, p.b)));
  }
  return best;
}

/// Strict overlap is required: a disc tangent to an ellipse (within 1e-6 m)
/// does not count.
inline Contact check_collision(Vec2 position, double heading, const Footprint& fp,
                               const OccupancyGrid* grid, std::span<const Pedestrian> peds) {
  if (grid)
    for (const auto& off : fp.offsets)
      if (grid->disc_hits_occupied(disc_center(position, heading, off), fp.r_disc))
        return Contact::static_obstacle;
  if (min_clearance(position, heading, fp, peds) < -1e-6) return Contact::pedestrian;
  return Contact::none;
}

}  // namespace lmpcc::sim
