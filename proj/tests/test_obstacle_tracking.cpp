#include "lmpcc/obstacle_tracking.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lmpcc;

TEST(Kalman, NoiselessLineGivesExactVelocity) {
  KalmanParams p;
  p.accel_std = 0.0;
  p.meas_std = 0.0;
  auto t = KalmanTrack::initialize({1.0, 2.0}, p);
  const Vec2 v(0.8, -0.3);
  const double dt = 0.1;
  for (int k = 1; k <= 2; ++k) t = kalman_update(t, Vec2(1.0, 2.0) + k * dt * v, dt);
  EXPECT_NEAR((t.velocity() - v).norm(), 0.0, 1e-9);
  EXPECT_NEAR((t.position() - (Vec2(1.0, 2.0) + 2 * dt * v)).norm(), 0.0, 1e-9);
}

TEST(Kalman, StationaryTargetVelocityDecays) {
  auto t = KalmanTrack::initialize({0.0, 0.0});
  t.state(2) = 1.0;
  for (int k = 0; k < 200; ++k) t = kalman_update(t, {0.0, 0.0}, 0.05);
  EXPECT_LT(t.velocity().norm(), 0.02);
}

TEST(Kalman, NoisyWalkSeed42) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 0.05);
  const Vec2 v(1.2, 0.0);
  const double dt = 0.05;
  auto t = KalmanTrack::initialize({0.0, 0.0});
  for (int k = 1; k <= 20; ++k) {
    const Vec2 truth = k * dt * v;
    t = kalman_update(t, truth + Vec2(noise(rng), noise(rng)), dt);
  }
  EXPECT_LT((t.velocity() - v).norm(), 0.1);
}

TEST(Kalman, CovarianceStaysPsd) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.3);
  auto t = KalmanTrack::initialize({0.0, 0.0});
  for (int k = 0; k < 300; ++k) {
    t = kalman_update(t, Vec2(noise(rng), noise(rng)), 0.01 + 0.001 * (k % 7));
    ASSERT_TRUE(is_psd(t.covariance, 1e-12));
  }
}

TEST(Kalman, RejectsBadInput) {
  auto t = KalmanTrack::initialize({0.0, 0.0});
  EXPECT_THROW(kalman_update(t, {0.0, 0.0}, 0.0), InvalidInput);
  t.covariance(0, 0) = -1.0;
  EXPECT_THROW(kalman_update(t, {0.0, 0.0}, 0.1), InvalidInput);
}

TEST(Prediction, StationaryObstacle) {
  const EllipseObstacle o{1, {2.0, 1.0}, {0.0, 0.0}, 0.3, 0.2, 0.4};
  const auto b = minimal_enlargement({0.3, 0.2}, 0.25);
  const auto p = predict_horizon(o.position, o.velocity, o, 5, 0.2, b);
  ASSERT_EQ(p.steps.size(), 6u);
  for (const auto& s : p.steps) {
    EXPECT_EQ(s.position, o.position);
    EXPECT_EQ(s.psi, 0.4);
  }
}

TEST(Prediction, ConstantVelocityOffsets) {
  const EllipseObstacle o{1, {0.0, 0.0}, {1.0, 0.0}, 0.3, 0.2, 0.0};
  const auto p = predict_horizon(o.position, o.velocity, o, 3, 0.2, minimal_enlargement({0.3, 0.2}, 0.25));
  const double expect[] = {0.0, 0.2, 0.4, 0.6};
  for (int k = 0; k <= 3; ++k) {
    EXPECT_NEAR(p.steps[k].position.x(), expect[k], 1e-15);
    EXPECT_NEAR(p.steps[k].position.y(), 0.0, 1e-15);
  }
  // minor axis along the velocity: the a axis points sideways
  EXPECT_NEAR(p.steps[0].psi, kPi / 2, 1e-15);
}

TEST(Prediction, AffineInStep) {
  const EllipseObstacle o{1, {0.5, -1.0}, {0.3, 0.7}, 0.3, 0.2, 0.0};
  const auto p = predict_horizon(o.position, o.velocity, o, 15, 0.2, minimal_enlargement({0.3, 0.2}, 0.25));
  for (int k = 1; k + 1 <= 15; ++k) {
    const Vec2 d2 = p.steps[k + 1].position - 2.0 * p.steps[k].position + p.steps[k - 1].position;
    EXPECT_NEAR(d2.norm(), 0.0, 1e-14);
  }
}

TEST(Prediction, EnlargedAxesFromBound) {
  KalmanTrack t = KalmanTrack::initialize({0.0, 0.0});
  const EllipseObstacle geom{3, {0.0, 0.0}, {0.0, 0.0}, 0.3, 0.2, 0.0};
  const auto p = predict_horizon(t, geom, 4, 0.2, 0.25);
  const auto b = minimal_enlargement({0.3, 0.2}, 0.25);
  EXPECT_DOUBLE_EQ(p.alpha, 0.3 + b.delta);
  EXPECT_DOUBLE_EQ(p.beta, 0.2 + b.delta);
  EXPECT_TRUE(containment_check({0.3, 0.2}, 0.25, p.alpha - 0.3).passed);
}

TEST(Orientation, SlowObstacleKeepsPrevious) {
  EXPECT_EQ(obstacle_orientation({0.01, 0.02}, 1.1), 1.1);
  PredictionOptions major;
  major.minor_axis_along_velocity = false;
  EXPECT_NEAR(obstacle_orientation({0.0, 1.0}, 0.0, major), kPi / 2, 1e-15);
}

TEST(DynamicConstraint, Examples) {
  EXPECT_EQ(dynamic_constraint({1.0, 1.0}, {1.0, 1.0}, 0.3, 1.0, 1.0), 0.0);
  EXPECT_NEAR(dynamic_constraint({2.0, 0.0}, {0.0, 0.0}, 0.0, 1.0, 1.0), 4.0, 1e-15);
  EXPECT_NEAR(dynamic_constraint({0.0, 1.5}, {0.0, 0.0}, kPi / 2, 2.0, 1.0), 0.5625, 1e-15);
}

TEST(DynamicConstraint, RotationInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Vec2 p(u(rng), u(rng)), c(u(rng), u(rng));
    const double psi = u(rng), rot = u(rng);
    const Mat2 r = rotation(rot);
    const double v1 = dynamic_constraint(p, c, psi, 0.8, 0.4);
    const double v2 = dynamic_constraint(r * p, r * c, psi + rot, 0.8, 0.4);
    EXPECT_NEAR(v1, v2, 1e-12 * (1.0 + v1));
  }
}

TEST(DynamicConstraint, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vec2 p(u(rng), u(rng)), c(u(rng), u(rng));
    const double psi = u(rng);
    const Vec2 g = dynamic_constraint_gradient(p, c, psi, 0.7, 0.45);
    for (int d = 0; d < 2; ++d) {
      Vec2 e = Vec2::Zero();
      e(d) = h;
      const double fd = (dynamic_constraint(p + e, c, psi, 0.7, 0.45) - dynamic_constraint(p - e, c, psi, 0.7, 0.45)) / (2 * h);
      EXPECT_NEAR(g(d), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(DynamicConstraint, SatisfiedImpliesDisjoint) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ax(0.1, 1.0), ang(-kPi, kPi), pos(-3.0, 3.0), rad(0.1, 0.6);
  int checked = 0;
  while (checked < 300) {
    double a = ax(rng), b = ax(rng);
    if (a < b) std::swap(a, b);
    const double r = rad(rng), psi = ang(rng);
    const Vec2 p(pos(rng), pos(rng));
    const auto bound = minimal_enlargement({a, b}, r);
    if (dynamic_constraint(p, Vec2::Zero(), psi, bound.alpha, bound.beta) <= 1.0) continue;
    ++checked;
    // brute-force distance from the disc centre to the true ellipse
    const Vec2 l = rotation(psi).transpose() * p;
    double best = 1e300;
    for (int k = 0; k < 20000; ++k) {
      const double t = 2.0 * kPi * k / 20000;
      best = std::min(best, (l - Vec2(a * std::cos(t), b * std::sin(t))).norm());
    }
    EXPECT_GE(best, r - 1e-3) << a << " " << b << " " << r;
  }
}

TEST(SelectNearest, FewerThanLimit) {
  std::vector<EllipseObstacle> obs(3);
  for (int i = 0; i < 3; ++i) obs[i].id = i, obs[i].position = {double(i), 0.0};
  EXPECT_EQ(select_nearest(obs, Vec2::Zero()).size(), 3u);
}

TEST(SelectNearest, DistanceThenId) {
  // integer points at distance exactly 5, except two farther ones
  const std::vector<Vec2> pts{{3, 4}, {4, -3}, {7, 0}, {0, 5}, {-5, 0}, {0, 8}, {-3, -4}, {-4, 3}};
  std::vector<EllipseObstacle> obs(8);
  for (int i = 0; i < 8; ++i) {
    obs[i].id = 7 - i;
    obs[i].position = pts[i];
  }
  const auto sel = select_nearest(obs, Vec2::Zero());
  ASSERT_EQ(sel.size(), 6u);
  std::vector<int> ids;
  for (const auto& o : sel) ids.push_back(o.id);
  EXPECT_EQ(ids, (std::vector<int>{0, 1, 3, 4, 6, 7}));
}

TEST(SelectNearest, Empty) {
  EXPECT_TRUE(select_nearest({}, Vec2::Zero()).empty());
}

TEST(Tracker, DropsMissingIdsAndTracksVelocity) {
  ObstacleTracker tr;
  for (int k = 0; k < 40; ++k) {
    std::vector<ObstacleTracker::Detection> det{{1, Vec2(0.05 * k, 0.0), 0.3, 0.2}};
    if (k < 10) det.push_back({2, Vec2(5.0, 5.0), 0.3, 0.2});
    tr.update(det, 0.05);
  }
  const auto obs = tr.obstacles();
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs[0].id, 1);
  EXPECT_NEAR(obs[0].velocity.x(), 1.0, 0.05);
  EXPECT_NEAR(obs[0].psi, kPi / 2, 0.1);
  EXPECT_EQ(tr.track(2), nullptr);
}

TEST(EnlargementCache, ReusesResult) {
  EnlargementCache c;
  const auto& a = c.get(0.3, 0.2, 0.25);
  const auto& b = c.get(0.3, 0.2, 0.25);
  EXPECT_EQ(&a, &b);
  EXPECT_DOUBLE_EQ(a.delta, minimal_enlargement({0.3, 0.2}, 0.25).delta);
}
