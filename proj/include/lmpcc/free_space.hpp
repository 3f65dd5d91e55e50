#pragma once

// Rectangular free-space regions around the horizon seed points and the
// linear constraints they induce on the robot discs.

#include "lmpcc/occupancy_grid.hpp"

#include <optional>
#include <span>
#include <vector>

namespace lmpcc {

/// Points p with offset - normal . p > 0.
struct Halfspace {
  Vec2 normal{1.0, 0.0};
  double offset{0.0};

  double residual(Vec2 p) const { return offset - normal.dot(p); }
};

enum Side : int { kFront = 0, kLeft = 1, kBack = 2, kRight = 3 };

struct ConvexRegion {
  std::array<Halfspace, 4> sides;
  Vec2 seed{0.0, 0.0};
  double orientation{0.0};
  std::array<double, 4> search_offsets{};  // before the disc-radius reduction
  bool degenerate{false};

  bool contains(Vec2 p) const {
    for (const auto& s : sides)
      if (!(s.residual(p) > 0.0)) return false;
    return true;
  }
  /// Corners in counter-clockwise order (front-left first).
  std::array<Vec2, 4> corners() const {
    const Vec2 f = sides[kFront].normal, l = sides[kLeft].normal;
    const double df = sides[kFront].offset - f.dot(seed), db = sides[kBack].offset + f.dot(seed);
    const double dl = sides[kLeft].offset - l.dot(seed), dr = sides[kRight].offset + l.dot(seed);
    return {seed + df * f + dl * l, seed - db * f + dl * l, seed - db * f - dr * l,
            seed + df * f - dr * l};
  }
};

struct SearchParams {
  double step{0.05};
  double max_distance{2.0};
  double degenerate_half_width{0.01};
};

class InfeasibleSeed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline ConvexRegion region_from_offsets(Vec2 seed, double orientation,
                                        const std::array<double, 4>& offsets) {
  const Mat2 r = rotation(orientation);
  const std::array<Vec2, 4> local = {Vec2(1, 0), Vec2(0, 1), Vec2(-1, 0), Vec2(0, -1)};
  ConvexRegion reg;
  reg.seed = seed;
  reg.orientation = orientation;
  for (int s = 0; s < 4; ++s) {
    reg.sides[s].normal = r * local[s];
    reg.sides[s].offset = reg.sides[s].normal.dot(seed) + offsets[s];
  }
  return reg;
}

/// Point box of the configured half-width around `seed`.
inline ConvexRegion degenerate_region(Vec2 seed, double orientation, const SearchParams& p = {}) {
  const double h = p.degenerate_half_width;
  ConvexRegion reg = region_from_offsets(seed, orientation, {h, h, h, h});
  reg.degenerate = true;
  return reg;
}

/// Grows a rectangle aligned with `orientation` from a zero-size box at the
/// seed. All sides advance by one step per round; a side stops at its last
/// free position once its swept strip overlaps an occupied cell, the others
/// keep growing up to the maximum search distance. The result is shrunk by
/// the disc radius.
inline ConvexRegion expand_rectangle(const OccupancyGrid& grid, Vec2 seed, double orientation,
                                     double r_disc, const SearchParams& params = {}) {
  if (grid.occupied_at(seed)) throw InfeasibleSeed("expand_rectangle: seed cell occupied");
  const Mat2 r = rotation(orientation);
  const Vec2 ex = r.col(0), ey = r.col(1);
  std::array<double, 4> off{0.0, 0.0, 0.0, 0.0};
  std::array<bool, 4> fixed{false, false, false, false};
  const int rounds = static_cast<int>(std::lround(params.max_distance / params.step));
  constexpr double thin = 5e-8;  // half-width given to zero-width strips

  auto strip = [&](int side, double from, double to) {
    // local box [x0, x1] x [y0, y1]
    double x0, x1, y0, y1;
    switch (side) {
      case kFront: x0 = from, x1 = to, y0 = -off[kRight], y1 = off[kLeft]; break;
      case kBack: x0 = -to, x1 = -from, y0 = -off[kRight], y1 = off[kLeft]; break;
      case kLeft: y0 = from, y1 = to, x0 = -off[kBack], x1 = off[kFront]; break;
      default: y0 = -to, y1 = -from, x0 = -off[kBack], x1 = off[kFront]; break;
    }
    if (x1 - x0 < 2 * thin) x0 -= thin, x1 += thin;
    if (y1 - y0 < 2 * thin) y0 -= thin, y1 += thin;
    return std::array<Vec2, 4>{seed + x0 * ex + y0 * ey, seed + x1 * ex + y0 * ey,
                               seed + x1 * ex + y1 * ey, seed + x0 * ex + y1 * ey};
  };

  for (int k = 1; k <= rounds; ++k) {
    const double next = k * params.step;
    bool any_open = false;
    for (int s = 0; s < 4; ++s) {
      if (fixed[s]) continue;
      if (grid.any_occupied_in(strip(s, off[s], next)))
        fixed[s] = true;
      else
        off[s] = next;
      any_open = any_open || !fixed[s];
    }
    if (!any_open) break;
  }

  std::array<double, 4> reduced;
  for (int s = 0; s < 4; ++s) reduced[s] = off[s] - r_disc;
  ConvexRegion reg;
  if (reduced[kFront] + reduced[kBack] <= 0.0 || reduced[kLeft] + reduced[kRight] <= 0.0)
    reg = degenerate_region(seed, orientation, params);
  else
    reg = region_from_offsets(seed, orientation, reduced);
  reg.search_offsets = off;
  return reg;
}

/// Seed points for the current cycle: the previous plan shifted by one step
/// with the last point extrapolated, or copies of the current position.
inline std::vector<Vec2> shift_seed(std::span<const Vec2> previous_positions, Vec2 current,
                                    int horizon_steps) {
  const std::size_t n = static_cast<std::size_t>(horizon_steps) + 1;
  if (previous_positions.size() != n) return std::vector<Vec2>(n, current);
  std::vector<Vec2> q(n);
  for (std::size_t k = 0; k + 1 < n; ++k) q[k] = previous_positions[k + 1];
  q[n - 1] = 2.0 * previous_positions[n - 1] - previous_positions[n - 2];
  return q;
}

/// Direction of travel at each seed point; falls back to `heading` where the
/// seed does not move.
inline std::vector<double> seed_orientations(std::span<const Vec2> seed, double heading) {
  std::vector<double> out(seed.size(), heading);
  double last = heading;
  for (std::size_t k = 0; k < seed.size(); ++k) {
    Vec2 d = Vec2::Zero();
    if (k + 1 < seed.size()) d = seed[k + 1] - seed[k];
    if (d.norm() < 1e-3 && k > 0) d = seed[k] - seed[k - 1];
    if (d.norm() >= 1e-3) last = std::atan2(d.y(), d.x());
    out[k] = last;
  }
  return out;
}

/// World position of a disc given the body pose.
inline Vec2 disc_center(Vec2 position, double heading, Vec2 body_offset) {
  return position + rotation(heading) * body_offset;
}

/// Residual h - n . (p + R(psi) p_j) for each (side, disc); row = side.
inline Eigen::MatrixXd static_constraints(const ConvexRegion& region, Vec2 position,
                                          double heading, std::span<const Vec2> disc_offsets) {
  Eigen::MatrixXd res(4, static_cast<Eigen::Index>(disc_offsets.size()));
  for (std::size_t j = 0; j < disc_offsets.size(); ++j) {
    const Vec2 c = disc_center(position, heading, disc_offsets[j]);
    for (int l = 0; l < 4; ++l) res(l, static_cast<Eigen::Index>(j)) = region.sides[l].residual(c);
  }
  return res;
}

/// Clears cells inside each obstacle ellipse dilated by one cell.
struct EllipseFootprint {
  Vec2 center;
  double psi{0.0};
  double a{0.3};
  double b{0.2};
};

inline void erase_obstacles(OccupancyGrid& grid, std::span<const EllipseFootprint> obstacles) {
  for (const auto& o : obstacles)
    grid.fill_ellipse(o.center, o.psi, o.a + grid.resolution(), o.b + grid.resolution(), false);
}

/// Region for one seed with the fallback chain used by the controller:
/// seed, then the robot position, then a point box at the seed.
inline ConvexRegion region_with_fallback(const OccupancyGrid& grid, Vec2 seed, double orientation,
                                         Vec2 robot, double r_disc, const SearchParams& p = {}) {
  try {
    return expand_rectangle(grid, seed, orientation, r_disc, p);
  } catch (const InfeasibleSeed&) {
  }
  try {
    return expand_rectangle(grid, robot, orientation, r_disc, p);
  } catch (const InfeasibleSeed&) {
  }
  return degenerate_region(seed, orientation, p);
}

struct LateralSearch {
  double shift_step{0.1};
  double max_shift{1.5};
  double blocked_front{0.25};  // front clearance (after r_disc) below which a seed counts as blocked
  double open_front{0.5};      // front clearance required of a shifted region
};

/// True when the region stops short ahead of its seed.
inline bool front_blocked(const ConvexRegion& reg, double r_disc, const LateralSearch& ls) {
  return reg.search_offsets[kFront] < r_disc + ls.blocked_front;
}

/// Seeds shifted sideways (side = +1 left, -1 right of `orientation`) in
/// steps until the expanded region has room ahead. The straight strip from
/// the original seed to the shifted one must be free.
inline std::optional<ConvexRegion> lateral_region_search(const OccupancyGrid& grid, Vec2 seed,
                                                         double orientation, double r_disc, int side,
                                                         const SearchParams& p = {},
                                                         const LateralSearch& ls = {}) {
  const Vec2 n = rotation(orientation).col(1) * static_cast<double>(side);
  const Vec2 f = rotation(orientation).col(0);
  const int steps = static_cast<int>(std::lround(ls.max_shift / ls.shift_step));
  const double w = 0.5 * grid.resolution();
  for (int j = 1; j <= steps; ++j) {
    const Vec2 q = seed + (j * ls.shift_step) * n;
    const std::array<Vec2, 4> strip{seed - w * f, q - w * f, q + w * f, seed + w * f};
    if (grid.any_occupied_in(strip)) return std::nullopt;
    const auto reg = expand_rectangle(grid, q, orientation, r_disc, p);
    if (!reg.degenerate && reg.search_offsets[kFront] >= r_disc + ls.open_front) return reg;
  }
  return std::nullopt;
}

}  // namespace lmpcc
