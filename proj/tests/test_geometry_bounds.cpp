#include "lmpcc/geometry_bounds.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lmpcc;

namespace {

// Farthest point of ellipse (+) disc in direction n: support of the ellipse
// found by dense sampling, plus r * n.
Vec2 support_point(double a, double b, double r, Vec2 n, int samples = 200000) {
  Vec2 best(a, 0.0);
  double best_v = -1e300;
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * kPi * i / samples;
    const Vec2 p(a * std::cos(t), b * std::sin(t));
    if (p.dot(n) > best_v) best_v = p.dot(n), best = p;
  }
  return best + r * n;
}

// Brute-force containment: disc boundary points around dense ellipse points.
double brute_worst(double a, double b, double r, double delta, int ns = 1500, int nd = 48) {
  double worst = 0.0;
  const double al = a + delta, be = b + delta;
  for (int i = 0; i < ns; ++i) {
    const double t = 2.0 * kPi * i / ns;
    const Vec2 c(a * std::cos(t), b * std::sin(t));
    for (int j = 0; j < nd; ++j) {
      const double s = 2.0 * kPi * j / nd;
      const Vec2 p = c + r * Vec2(std::cos(s), std::sin(s));
      worst = std::max(worst, p.x() * p.x() / (al * al) + p.y() * p.y() / (be * be) - 1.0);
    }
  }
  return worst;
}

}  // namespace

TEST(MinkowskiBoundary, CirclePlusDisc) {
  const Vec2 p = minkowski_boundary_point({1.0, 1.0}, 0.5, 0.0);
  EXPECT_NEAR(p.x(), 1.5, 1e-15);
  EXPECT_NEAR(p.y(), 0.0, 1e-15);
}

TEST(MinkowskiBoundary, ZeroRadiusIsEllipse) {
  const Vec2 p = minkowski_boundary_point({1.0, 0.5}, 0.0, kPi / 2);
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 0.5, 1e-15);
}

TEST(MinkowskiBoundary, MatchesSupportPointAlongNormal) {
  const double a = 1.0, b = 0.5, r = 0.3, th = kPi / 4;
  const Vec2 n = Vec2(b * std::cos(th), a * std::sin(th)).normalized();
  const Vec2 expect = support_point(a, b, r, n);
  const Vec2 got = minkowski_boundary_point({a, b}, r, th);
  EXPECT_NEAR((got - expect).norm(), 0.0, 1e-6);
}

TEST(LambdaRoots, SecondRootIsSquaredSum) {
  const auto l = lambda_roots({0.7, 0.4}, 0.25, 0.1);
  EXPECT_DOUBLE_EQ(l[1], 0.35 * 0.35);
}

TEST(LambdaRoots, CircleRootsThreeAndFourCoincide) {
  const auto l = lambda_roots({0.5, 0.5}, 0.3, 0.2);
  EXPECT_DOUBLE_EQ(l[2], l[3]);
}

TEST(LambdaRoots, HandArithmetic) {
  const double a = 0.3, b = 0.2, r = 0.25, d = 0.1, q = r + d;
  const double den = a * a + 2 * a * b + 2 * r * a + b * b + 2 * r * b;
  const auto l = lambda_roots({a, b}, r, d);
  EXPECT_NEAR(l[0], (2 * a * q * q * q + 2 * b * q * q * q + 4 * a * b * q * q) / den, 1e-15);
  EXPECT_NEAR(l[1], 0.1225, 1e-15);
  EXPECT_NEAR(l[2], 4 * 0.09 + 4 * 0.3 * 0.35 + 0.1225, 1e-15);
  EXPECT_NEAR(l[3], 4 * 0.04 + 4 * 0.2 * 0.35 + 0.1225, 1e-15);
}

TEST(LambdaRoots, DegenerateInputThrows) {
  EXPECT_THROW(lambda_roots(EllipseShape{}, -1.0, 0.0), InvalidInput);
}

TEST(EllipseShape, RejectsBadAxes) {
  EXPECT_THROW(EllipseShape(0.2, 0.3), InvalidInput);
  EXPECT_THROW(EllipseShape(0.2, 0.0), InvalidInput);
  EXPECT_NO_THROW(EllipseShape::normalized(0.2, 0.3));
}

TEST(MinimalEnlargement, CircleIsExact) {
  const auto res = minimal_enlargement({0.5, 0.5}, 0.3);
  EXPECT_NEAR(res.delta, 0.3, 1e-8);
  EXPECT_NEAR(res.alpha, 0.8, 1e-8);
}

TEST(MinimalEnlargement, ZeroRadius) {
  EXPECT_EQ(minimal_enlargement({1.7, 0.3}, 0.0).delta, 0.0);
}

TEST(MinimalEnlargement, PedestrianEllipseAgainstBruteForce) {
  const EllipseShape e{0.3, 0.2};
  const auto res = minimal_enlargement(e, 0.25, 1e-9);
  EXPECT_GE(res.delta, 0.25);
  EXPECT_LE(brute_worst(0.3, 0.2, 0.25, res.delta), 1e-9);
  // bisection on the brute-force oracle lands at the same value
  double lo = 0.25, hi = 0.3 - 0.2 + 0.25 + 0.1;
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    (brute_worst(0.3, 0.2, 0.25, mid, 3000, 64) <= 0.0 ? hi : lo) = mid;
  }
  EXPECT_NEAR(res.delta, hi, 1e-5);
}

TEST(MinimalEnlargement, BadArgumentsThrow) {
  EXPECT_THROW(minimal_enlargement({1.0, 0.5}, -0.1), InvalidInput);
  EXPECT_THROW(minimal_enlargement({1.0, 0.5}, 0.1, 0.0), InvalidInput);
}

TEST(MinimalEnlargement, IterationCapReportsBracket) {
  try {
    minimal_enlargement({1.0, 0.2}, 0.5, 1e-12, 3);
    FAIL() << "expected BoundSolverError";
  } catch (const BoundSolverError& e) {
    EXPECT_LT(e.bracket_lo, e.bracket_hi);
  }
}

TEST(ContainmentCheck, CirclePasses) {
  const auto rep = containment_check({1.0, 1.0}, 0.5, 0.5);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.worst_violation, 0.0);
}

TEST(ContainmentCheck, NaiveBoundFailsForFlatEllipse) {
  const auto rep = containment_check({1.0, 0.2}, 0.5, 0.5);
  EXPECT_FALSE(rep.passed);
  EXPECT_GT(brute_worst(1.0, 0.2, 0.5, 0.5), 0.0);
}

TEST(ContainmentCheck, NeedsEnoughSamples) {
  EXPECT_THROW(containment_check({1.0, 0.5}, 0.1, 0.1, 50), InvalidInput);
}

TEST(ContainmentCheck, PedestrianBoundPasses) {
  const auto res = minimal_enlargement({0.3, 0.2}, 0.25);
  EXPECT_TRUE(containment_check({0.3, 0.2}, 0.25, res.delta).passed);
}

TEST(BoundProperties, MonotoneInRadius) {
  const EllipseShape e{1.2, 0.3};
  double prev = 0.0;
  for (double r = 0.0; r <= 1.5; r += 0.1) {
    const double d = minimal_enlargement(e, r).delta;
    EXPECT_GE(d, prev - 1e-9) << "r=" << r;
    prev = d;
  }
}

TEST(BoundProperties, SymmetricInAxisOrder) {
  const auto d1 = minimal_enlargement(EllipseShape::normalized(0.4, 1.1), 0.35).delta;
  const auto d2 = minimal_enlargement(EllipseShape::normalized(1.1, 0.4), 0.35).delta;
  EXPECT_EQ(d1, d2);
}

TEST(BoundProperties, CircleGrid) {
  for (double a : {0.05, 0.3, 1.0, 2.0})
    for (double r : {0.05, 0.25, 0.8, 2.0}) EXPECT_NEAR(minimal_enlargement({a, a}, r).delta, r, 1e-8);
}

TEST(BoundProperties, RandomSafetyAndMinimality) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int i = 0; i < 200; ++i) {
    double a = u(rng), b = u(rng);
    if (a < b) std::swap(a, b);
    const double r = u(rng);
    const auto res = minimal_enlargement({a, b}, r);
    ASSERT_TRUE(containment_check({a, b}, r, res.delta).passed);
    if (a / b >= 2.0) {
      EXPECT_FALSE(containment_check({a, b}, r, res.delta - 1e-8).passed);
    }
  }
}

TEST(BoundProperties, NaiveBoundCounterexampleExists) {
  bool found = false;
  for (double r : {0.1, 0.3, 0.5, 1.0})
    if (!containment_check({0.9, 0.3}, r, r).passed) found = true;
  EXPECT_TRUE(found);
}

TEST(Clearance, DiscEllipseDistance) {
  const EllipseShape e{0.3, 0.2};
  EXPECT_NEAR(disc_ellipse_clearance({1.0, 0.0}, 0.25, {0.0, 0.0}, 0.0, e), 0.45, 1e-9);
  EXPECT_NEAR(disc_ellipse_clearance({0.0, 1.0}, 0.25, {0.0, 0.0}, 0.0, e), 0.55, 1e-9);
  // rotation by pi/2 swaps the axes
  EXPECT_NEAR(disc_ellipse_clearance({1.0, 0.0}, 0.25, {0.0, 0.0}, kPi / 2, e), 0.55, 1e-9);
  EXPECT_LT(disc_ellipse_clearance({0.0, 0.0}, 0.1, {0.0, 0.0}, 0.0, e), 0.0);
}

TEST(Clearance, MatchesDenseSampling) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const EllipseShape e{0.9, 0.35};
  for (int i = 0; i < 50; ++i) {
    const Vec2 p(u(rng), u(rng));
    if (p.x() * p.x() / 0.81 + p.y() * p.y() / (0.35 * 0.35) < 1.0) continue;
    double best = 1e300;
    for (int k = 0; k < 100000; ++k) {
      const double t = 2.0 * kPi * k / 100000;
      best = std::min(best, (p - Vec2(0.9 * std::cos(t), 0.35 * std::sin(t))).norm());
    }
    EXPECT_NEAR(disc_ellipse_clearance(p, 0.2, Vec2::Zero(), 0.0, e), best - 0.2, 1e-6);
  }
}
