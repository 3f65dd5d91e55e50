#include "lmpcc/free_space.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace lmpcc;

namespace {

OccupancyGrid open_grid(double size = 10.0, double res = 0.05) {
  const int n = static_cast<int>(std::lround(size / res));
  return OccupancyGrid(res, Vec2(-0.5 * size, -0.5 * size), n, n);
}

double side_distance(const ConvexRegion& reg, int side) {
  return reg.sides[side].residual(reg.seed);
}

}  // namespace

TEST(OccupancyGrid, CellMappingRoundTrips) {
  const OccupancyGrid g(0.1, {-1.0, 2.0}, 30, 20);
  for (int iy = 0; iy < 20; iy += 3)
    for (int ix = 0; ix < 30; ix += 4) {
      const auto c = g.cell_of(g.cell_center(ix, iy));
      EXPECT_EQ(c[0], ix);
      EXPECT_EQ(c[1], iy);
    }
  EXPECT_TRUE(g.occupied(-1, 0));
  EXPECT_TRUE(g.occupied_at({-5.0, 0.0}));
}

TEST(OccupancyGrid, RejectsBadDimensions) {
  EXPECT_THROW(OccupancyGrid(0.0, Vec2::Zero(), 3, 3), InvalidInput);
  EXPECT_THROW(OccupancyGrid(0.1, Vec2::Zero(), 0, 3), InvalidInput);
}

TEST(OccupancyGrid, TextFormatRoundTrip) {
  OccupancyGrid g(0.25, {1.0, -2.0}, 7, 5);
  g.set(0, 0, true);
  g.set(6, 4, true);
  g.set(3, 2, true);
  std::stringstream ss;
  write_text_grid(ss, g);
  const auto back = parse_text_grid(ss);
  EXPECT_TRUE(back == g);
}

TEST(OccupancyGrid, TextFormatErrors) {
  std::istringstream missing("resolution 0.1\nsize 2 1\n00\n");
  EXPECT_THROW(parse_text_grid(missing), GridFormatError);
  std::istringstream rows("resolution 0.1\norigin 0 0\nsize 2 2\n00\n");
  EXPECT_THROW(parse_text_grid(rows), GridFormatError);
  std::istringstream junk("resolution 0.1\norigin 0 0\nsize 2 1\n0x\n");
  EXPECT_THROW(parse_text_grid(junk), GridFormatError);
}

TEST(OccupancyGrid, PgmThreshold) {
  std::istringstream in("P2\n# c\n3 2\n255\n0 200 100\n255 128 127\n");
  const auto g = parse_pgm(in, 0.1, Vec2::Zero());
  // first image row is the top of the map
  EXPECT_TRUE(g.occupied(0, 1));
  EXPECT_FALSE(g.occupied(1, 1));
  EXPECT_TRUE(g.occupied(2, 1));
  EXPECT_FALSE(g.occupied(0, 0));
  EXPECT_FALSE(g.occupied(1, 0));
  EXPECT_TRUE(g.occupied(2, 0));
}

TEST(OccupancyGrid, MissingFile) {
  try {
    load_grid("/nonexistent/map.txt");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()), "grid not found: /nonexistent/map.txt");
  }
}

TEST(OccupancyGrid, DistanceFieldAgainstBruteForce) {
  OccupancyGrid g(0.1, Vec2::Zero(), 20, 15);
  g.set(3, 4, true);
  g.set(15, 10, true);
  const auto f = g.distance_field();
  for (int iy = 0; iy < 15; ++iy)
    for (int ix = 0; ix < 20; ++ix) {
      const double d = std::min((g.cell_center(ix, iy) - g.cell_center(3, 4)).norm(),
                                (g.cell_center(ix, iy) - g.cell_center(15, 10)).norm());
      EXPECT_NEAR(f[static_cast<std::size_t>(iy) * 20 + ix], d, 1e-12);
    }
}

TEST(ShiftSeed, StraightPlanExtendsByStep) {
  std::vector<Vec2> prev;
  for (int k = 0; k <= 5; ++k) prev.emplace_back(0.3 * k, 1.0);
  const auto q = shift_seed(prev, {0.0, 0.0}, 5);
  ASSERT_EQ(q.size(), 6u);
  EXPECT_NEAR(q[0].x(), 0.3, 1e-15);
  EXPECT_NEAR((q[5] - q[4]).norm(), 0.3, 1e-12);
  EXPECT_NEAR(q[5].x(), 1.8, 1e-12);
}

TEST(ShiftSeed, ColdStartCopiesPosition) {
  const auto q = shift_seed({}, {1.5, -2.0}, 4);
  ASSERT_EQ(q.size(), 5u);
  for (const auto& p : q) EXPECT_EQ(p, Vec2(1.5, -2.0));
}

TEST(ShiftSeed, ArcReflection) {
  std::vector<Vec2> prev;
  for (int k = 0; k <= 3; ++k) prev.emplace_back(std::cos(0.2 * k), std::sin(0.2 * k));
  const auto q = shift_seed(prev, Vec2::Zero(), 3);
  const Vec2 expect = 2.0 * prev[3] - prev[2];
  EXPECT_NEAR((q[3] - expect).norm(), 0.0, 1e-15);
}

TEST(ExpandRectangle, EmptyGridReachesMaximum) {
  const auto g = open_grid();
  const auto reg = expand_rectangle(g, {0.0, 0.0}, 0.0, 0.3);
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(side_distance(reg, s), 2.0 - 0.3, 1e-9);
  EXPECT_FALSE(reg.degenerate);
}

TEST(ExpandRectangle, WallAhead) {
  auto g = open_grid();
  g.fill_box({0.5, -3.0}, {0.55, 3.0});
  const auto reg = expand_rectangle(g, {0.0, 0.0}, 0.0, 0.3);
  EXPECT_NEAR(side_distance(reg, kFront), 0.5 - 0.3, 1e-9);
  EXPECT_NEAR(side_distance(reg, kBack), 2.0 - 0.3, 1e-9);
  EXPECT_NEAR(side_distance(reg, kLeft), 2.0 - 0.3, 1e-9);
  EXPECT_NEAR(side_distance(reg, kRight), 2.0 - 0.3, 1e-9);
}

TEST(ExpandRectangle, RotatedWallAhead) {
  auto g = open_grid();
  g.fill_box({-3.0, 0.81}, {3.0, 0.85});  // occupies the cell row starting at y = 0.8
  const auto reg = expand_rectangle(g, {0.0, 0.0}, kPi / 2, 0.2);
  EXPECT_NEAR(side_distance(reg, kFront), 0.8 - 0.2, 1e-9);
  EXPECT_NEAR(reg.sides[kFront].normal.y(), 1.0, 1e-12);
}

TEST(ExpandRectangle, OccupiedSeedThrows) {
  auto g = open_grid();
  g.fill_box({-0.1, -0.1}, {0.1, 0.1});
  EXPECT_THROW(expand_rectangle(g, {0.0, 0.0}, 0.0, 0.3), InfeasibleSeed);
}

TEST(ExpandRectangle, NarrowGapDegenerates) {
  auto g = open_grid();
  g.fill_box({-3.0, 0.2}, {3.0, 0.3});
  g.fill_box({-3.0, -0.3}, {3.0, -0.2});
  const auto reg = expand_rectangle(g, {0.0, 0.0}, 0.0, 0.3);
  EXPECT_TRUE(reg.degenerate);
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(side_distance(reg, s), 0.01, 1e-12);
}

TEST(ExpandRectangle, OppositeNormalsAntiParallel) {
  const auto g = open_grid();
  const auto reg = expand_rectangle(g, {0.3, -0.2}, 0.7, 0.25);
  EXPECT_NEAR((reg.sides[kFront].normal + reg.sides[kBack].normal).norm(), 0.0, 1e-12);
  EXPECT_NEAR((reg.sides[kLeft].normal + reg.sides[kRight].normal).norm(), 0.0, 1e-12);
}

TEST(ExpandRectangle, SoundOnRandomGrids) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-3.0, 3.0), ext(0.05, 0.8), ang(-kPi, kPi), unit(0.0, 1.0);
  const double r = 0.25;
  for (int trial = 0; trial < 40; ++trial) {
    auto g = open_grid(8.0);
    for (int b = 0; b < 12; ++b) {
      const Vec2 c(pos(rng), pos(rng));
      g.fill_box(c, c + Vec2(ext(rng), ext(rng)));
    }
    Vec2 seed(pos(rng), pos(rng));
    if (g.occupied_at(seed)) continue;
    const double psi = ang(rng);
    const auto reg = expand_rectangle(g, seed, psi, r);
    // the unreduced rectangle contains the seed strictly
    for (int s = 0; s < 4; ++s) EXPECT_GT(side_distance(reg, s) + r, 0.0);
    if (reg.degenerate) continue;
    const auto cs = reg.corners();
    for (int k = 0; k < 400; ++k) {
      const double u = unit(rng), v = unit(rng);
      const Vec2 p = cs[2] + u * (cs[3] - cs[2]) + v * (cs[1] - cs[2]);
      ASSERT_FALSE(g.disc_hits_occupied(p, r - 1e-6)) << "trial " << trial;
    }
  }
}

TEST(ExpandRectangle, Deterministic) {
  auto g = open_grid();
  g.fill_box({0.4, 0.3}, {1.0, 1.1});
  const auto a = expand_rectangle(g, {0.1, 0.2}, 0.4, 0.3);
  const auto b = expand_rectangle(g, {0.1, 0.2}, 0.4, 0.3);
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(a.sides[s].offset, b.sides[s].offset);
    EXPECT_EQ(a.sides[s].normal, b.sides[s].normal);
  }
}

TEST(StaticConstraints, CentreInsideAllPositive) {
  const auto reg = region_from_offsets({1.0, 1.0}, 0.3, {1.0, 0.5, 1.0, 0.5});
  const std::vector<Vec2> off{Vec2::Zero()};
  const auto res = static_constraints(reg, {1.0, 1.0}, 0.0, off);
  for (int l = 0; l < 4; ++l) EXPECT_GT(res(l, 0), 0.0);
}

TEST(StaticConstraints, OnSidePlaneIsZero) {
  const auto reg = region_from_offsets({0.0, 0.0}, 0.0, {1.0, 0.5, 1.0, 0.5});
  const std::vector<Vec2> off{Vec2::Zero()};
  const auto res = static_constraints(reg, {1.0, 0.2}, 0.0, off);
  EXPECT_NEAR(res(kFront, 0), 0.0, 1e-15);
}

TEST(StaticConstraints, OffsetDiscRotatesWithHeading) {
  const auto reg = region_from_offsets({0.0, 0.0}, 0.0, {1.0, 1.0, 1.0, 1.0});
  const std::vector<Vec2> off{{0.3, 0.0}};
  const auto res = static_constraints(reg, {0.0, 0.0}, kPi / 2, off);
  // disc centre lands at (0, 0.3)
  EXPECT_NEAR(res(kLeft, 0), 0.7, 1e-12);
  EXPECT_NEAR(res(kRight, 0), 1.3, 1e-12);
  EXPECT_NEAR(res(kFront, 0), 1.0, 1e-12);
}

TEST(EraseObstacles, ClearsDilatedEllipse) {
  auto g = open_grid(4.0);
  g.fill_ellipse({0.5, 0.5}, 0.3, 0.3, 0.2, true);
  ASSERT_GT(g.occupied_count(), 0u);
  const std::vector<EllipseFootprint> obs{{{0.5, 0.5}, 0.3, 0.3, 0.2}};
  erase_obstacles(g, obs);
  EXPECT_EQ(g.occupied_count(), 0u);
}

TEST(RegionFallback, UsesRobotWhenSeedOccupied) {
  auto g = open_grid();
  g.fill_box({0.9, -0.1}, {1.1, 0.1});
  const auto reg = region_with_fallback(g, {1.0, 0.0}, 0.0, {-1.0, 0.0}, 0.3);
  EXPECT_EQ(reg.seed, Vec2(-1.0, 0.0));
  EXPECT_FALSE(reg.degenerate);
}

TEST(RegionFallback, PointBoxWhenBothOccupied) {
  auto g = open_grid();
  g.fill_box({-1.5, -0.5}, {1.5, 0.5});
  const auto reg = region_with_fallback(g, {1.0, 0.0}, 0.0, {-1.0, 0.0}, 0.3);
  EXPECT_TRUE(reg.degenerate);
  EXPECT_EQ(reg.seed, Vec2(1.0, 0.0));
}

TEST(SeedOrientations, FollowsMotionAndHoldsWhenStill) {
  const std::vector<Vec2> seed{{0, 0}, {0, 0}, {1, 0}, {1, 1}, {1, 1}};
  const auto o = seed_orientations(seed, 0.5);
  EXPECT_NEAR(o[0], 0.5, 1e-15);
  EXPECT_NEAR(o[1], 0.0, 1e-15);
  EXPECT_NEAR(o[2], kPi / 2, 1e-15);
  EXPECT_NEAR(o[4], kPi / 2, 1e-15);
}

TEST(LateralSearch, FindsOpeningBesideBlock) {
  auto g = open_grid();
  g.fill_box({0.5, -0.3}, {0.8, 0.5});  // block ahead, open below
  const auto blocked = expand_rectangle(g, {0.0, 0.0}, 0.0, 0.3);
  ASSERT_TRUE(front_blocked(blocked, 0.3, {}));
  const auto right = lateral_region_search(g, {0.0, 0.0}, 0.0, 0.3, -1);
  ASSERT_TRUE(right.has_value());
  EXPECT_LT(right->seed.y(), -0.3);
  EXPECT_GE(right->search_offsets[kFront], 0.8);
}

TEST(LateralSearch, StopsAtWall) {
  auto g = open_grid();
  g.fill_box({0.5, -3.0}, {0.8, 3.0});
  EXPECT_FALSE(lateral_region_search(g, {0.0, 0.0}, 0.0, 0.3, +1).has_value());
  g.fill_box({-3.0, 0.3}, {3.0, 0.4});
  EXPECT_FALSE(lateral_region_search(g, {0.0, 0.0}, 0.0, 0.3, +1).has_value());
}
