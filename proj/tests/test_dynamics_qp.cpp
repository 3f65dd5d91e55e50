#include "lmpcc/dynamics.hpp"
#include "lmpcc/qp_solver.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lmpcc;

namespace {

template <class Model>
typename Model::State rk4_fine(const Model& m, typename Model::State x, const typename Model::Input& u,
                               double tau, int steps) {
  const double h = tau / steps;
  for (int i = 0; i < steps; ++i) {
    const auto k1 = m.derivative(x, u);
    const auto k2 = m.derivative(x + 0.5 * h * k1, u);
    const auto k3 = m.derivative(x + 0.5 * h * k2, u);
    const auto k4 = m.derivative(x + h * k3, u);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

template <class Model>
void check_jacobians(const Model& model, std::mt19937_64& rng, double tau) {
  using State = typename Model::State;
  using Input = typename Model::Input;
  std::uniform_real_distribution<double> pos(-5.0, 5.0), ang(-kPi, kPi), speed(0.0, 1.5), small(-0.4, 0.4);
  for (int trial = 0; trial < 100; ++trial) {
    State x = State::Zero();
    x(0) = pos(rng);
    x(1) = pos(rng);
    x(2) = ang(rng);
    x(Model::kTheta) = std::abs(pos(rng));
    if constexpr (Model::kSpeedState >= 0) x(Model::kSpeedState) = speed(rng);
    Input u;
    if constexpr (Model::kSpeedState >= 0)
      u << small(rng), small(rng);
    else
      u << speed(rng), small(rng) * 3.0;
    const auto st = step_dynamics(model, x, u, tau);
    const double h = 1e-6;
    for (int j = 0; j < Model::kStates; ++j) {
      State e = State::Zero();
      e(j) = h;
      const State fd = (step_dynamics(model, State(x + e), u, tau).next -
                        step_dynamics(model, State(x - e), u, tau).next) / (2 * h);
      const double err = (fd - st.dx.col(j)).norm();
      EXPECT_LE(err, 1e-5 * std::max(1.0, fd.norm())) << "state column " << j << " trial " << trial;
    }
    for (int j = 0; j < Model::kInputs; ++j) {
      Input e = Input::Zero();
      e(j) = h;
      const State fd = (step_dynamics(model, x, Input(u + e), tau).next -
                        step_dynamics(model, x, Input(u - e), tau).next) / (2 * h);
      const double err = (fd - st.du.col(j)).norm();
      EXPECT_LE(err, 1e-5 * std::max(1.0, fd.norm())) << "input column " << j << " trial " << trial;
    }
  }
}

}  // namespace

TEST(Unicycle, StraightStepIsExact) {
  UnicycleModel m;
  UnicycleModel::State x(0.0, 0.0, 0.0, 0.0);
  const auto st = step_dynamics(m, x, UnicycleModel::Input(1.0, 0.0), 0.2);
  EXPECT_DOUBLE_EQ(st.next(0), 0.2);
  EXPECT_DOUBLE_EQ(st.next(1), 0.0);
  EXPECT_DOUBLE_EQ(st.next(3), 0.2);
}

TEST(Unicycle, TurningStepLandsOnCircle) {
  UnicycleModel m;
  const double v = 1.2, w = 0.9, tau = 0.05;
  UnicycleModel::State x(0.0, 0.0, 0.0, 0.0);
  for (int i = 0; i < 40; ++i) {
    x = step_dynamics(m, x, UnicycleModel::Input(v, w), tau).next;
    const double t = (i + 1) * tau;
    const Vec2 exact(v / w * std::sin(w * t), v / w * (1.0 - std::cos(w * t)));
    EXPECT_LT((Vec2(x(0), x(1)) - exact).norm(), 1e-8) << "step " << i;
    EXPECT_NEAR((Vec2(x(0), x(1)) - Vec2(0.0, v / w)).norm(), v / w, 1e-8);
  }
}

TEST(Unicycle, FourthOrderConvergence) {
  UnicycleModel m;
  const UnicycleModel::Input u(1.0, 1.4);
  const UnicycleModel::State x0(0.0, 0.0, 0.3, 0.0);
  auto err = [&](double tau) {
    const auto x = step_dynamics(m, x0, u, tau).next;
    const double t = tau, r = u(0) / u(1);
    const Vec2 exact(r * (std::sin(0.3 + u(1) * t) - std::sin(0.3)), r * (std::cos(0.3) - std::cos(0.3 + u(1) * t)));
    return (Vec2(x(0), x(1)) - exact).norm();
  };
  // local error of an order-4 method scales with tau^5
  const double ratio = err(0.4) / err(0.2);
  EXPECT_GT(ratio, 20.0);
  EXPECT_LT(ratio, 45.0);
}

TEST(Bicycle, ZeroSteerIsStraightWithQuadraticTerm) {
  BicycleModel m;
  BicycleModel::State x;
  x << 1.0, -2.0, 0.0, 0.8, 0.0;
  const double a = 0.5, tau = 0.2;
  const auto next = step_dynamics(m, x, BicycleModel::Input(a, 0.0), tau).next;
  EXPECT_NEAR(next(0), 1.0 + 0.8 * tau + 0.5 * a * tau * tau, 1e-12);
  EXPECT_NEAR(next(1), -2.0, 1e-12);
  EXPECT_NEAR(next(3), 0.8 + a * tau, 1e-12);
  const auto ref = rk4_fine(m, x, BicycleModel::Input(a, 0.0), tau, 2000);
  EXPECT_LT((next - ref).norm(), 1e-10);
}

TEST(Bicycle, SteeringMatchesFineReference) {
  BicycleModel m;
  BicycleModel::State x;
  x << 0.0, 0.0, 0.4, 2.0, 0.0;
  const BicycleModel::Input u(-0.7, 0.3);
  const auto next = step_dynamics(m, x, u, 0.2).next;
  const auto ref = rk4_fine(m, x, u, 0.2, 4000);
  EXPECT_LT((next - ref).norm(), 1e-7);
}

TEST(Dynamics, RejectsNonPositiveStep) {
  UnicycleModel m;
  EXPECT_THROW(step_dynamics(m, UnicycleModel::State::Zero(), UnicycleModel::Input::Zero(), 0.0), InvalidInput);
}

TEST(Dynamics, UnicycleJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  check_jacobians(UnicycleModel{}, rng, 0.2);
}

TEST(Dynamics, BicycleJacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  check_jacobians(BicycleModel{}, rng, 0.2);
}

TEST(Dynamics, BrakeScalesSpeed) {
  UnicycleModel m;
  const auto u = m.brake({1.0, 0.3}, UnicycleModel::State::Zero(), 0.8);
  EXPECT_DOUBLE_EQ(u(0), 0.8);
  EXPECT_DOUBLE_EQ(u(1), 0.3);
}

// QP solver

namespace {

QpProblem make_qp(Eigen::MatrixXd h, Eigen::VectorXd c, Eigen::MatrixXd a, Eigen::VectorXd b, bool soft,
                  double rho = 1e4) {
  QpProblem qp;
  qp.H = std::move(h);
  qp.c = std::move(c);
  qp.A = std::move(a);
  qp.b = std::move(b);
  qp.soft.assign(static_cast<std::size_t>(qp.A.rows()), soft ? 1 : 0);
  qp.rho = rho;
  return qp;
}

}  // namespace

TEST(Qp, UnconstrainedMatchesLinearSolve) {
  Eigen::MatrixXd h(2, 2);
  h << 4, 1, 1, 3;
  Eigen::VectorXd c(2);
  c << 1, 2;
  const auto r = solve_qp(make_qp(h, c, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), false));
  const Eigen::VectorXd d = -h.inverse() * c;
  EXPECT_LT((r.d - d).norm(), 1e-8);
  EXPECT_TRUE(r.converged);
}

TEST(Qp, ActiveUpperBound) {
  // min 1/2 d^2 - 2 d  s.t. 1 - d >= 0  ->  d = 1, multiplier 1
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 1), a(1, 1);
  a << -1.0;
  Eigen::VectorXd c(1), b(1);
  c << -2.0;
  b << 1.0;
  const auto r = solve_qp(make_qp(h, c, a, b, false));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.d(0), 1.0, 1e-7);
  EXPECT_NEAR(r.lambda(0), 1.0, 1e-6);
}

TEST(Qp, InactiveBoundLeavesUnconstrainedMinimum) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 1), a(1, 1);
  a << -1.0;
  Eigen::VectorXd c(1), b(1);
  c << -0.5;
  b << 1.0;
  const auto r = solve_qp(make_qp(h, c, a, b, false));
  EXPECT_NEAR(r.d(0), 0.5, 1e-7);
  EXPECT_NEAR(r.lambda(0), 0.0, 1e-6);
}

TEST(Qp, ConflictingSoftRowsAreRelaxed) {
  // d >= 1 and d <= -1 cannot both hold; the L1 slack total is 2 for any d in [-1, 1]
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 1), a(2, 1);
  a << 1.0, -1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(1), b(2);
  b << -1.0, -1.0;
  const auto r = solve_qp(make_qp(h, c, a, b, true, 10.0));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.d(0), 0.0, 1e-6);
  EXPECT_NEAR(r.slack.sum(), 2.0, 1e-6);
}

TEST(Qp, SoftRowCheaperToViolateWhenRhoSmall) {
  // min 1/2 (d - 3)^2 with soft d <= 0 and rho = 1: optimum violates by 2
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 1), a(1, 1);
  a << -1.0;
  Eigen::VectorXd c(1), b(1);
  c << -3.0;
  b << 0.0;
  const auto r = solve_qp(make_qp(h, c, a, b, true, 1.0));
  EXPECT_NEAR(r.d(0), 2.0, 1e-6);
  EXPECT_NEAR(r.slack(0), 2.0, 1e-6);
}

TEST(Qp, RandomProblemsSatisfyKkt) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.1, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6, m = 10;
    Eigen::MatrixXd l(n, n), a(m, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) l(i, j) = g(rng);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    Eigen::MatrixXd h = l * l.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd c(n), b(m);
    for (int i = 0; i < n; ++i) c(i) = 3.0 * g(rng);
    for (int i = 0; i < m; ++i) b(i) = pos(rng);  // d = 0 is strictly feasible
    const auto r = solve_qp(make_qp(h, c, a, b, false));
    ASSERT_TRUE(r.converged) << "trial " << trial;
    const Eigen::VectorXd row = a * r.d + b;
    EXPECT_GE(row.minCoeff(), -1e-7);
    EXPECT_GE(r.lambda.minCoeff(), -1e-9);
    EXPECT_LT((h * r.d + c - a.transpose() * r.lambda).norm(), 1e-6);
    EXPECT_LT(std::abs(row.dot(r.lambda)), 1e-6);
  }
}

TEST(Qp, DimensionMismatchThrows) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(solve_qp(make_qp(h, c, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), false)), InvalidInput);
}
