#pragma once

// Vehicle models augmented with the path parameter (theta_dot = speed) and a
// two-stage Gauss-Legendre integrator (order 4) with exact sensitivities.

#include "lmpcc/common.hpp"

namespace lmpcc {

struct VehicleLimits {
  double v_min{0.0};
  double v_max{1.5};
  double omega_max{1.5};  // rad/s, unicycle
  double accel_max{2.0};  // m/s^2, bicycle
  double steer_max{0.5};  // rad, bicycle
};

/// Kinematic unicycle. State (x, y, psi, theta), input (v, omega).
struct UnicycleModel {
  static constexpr int kStates = 4;
  static constexpr int kInputs = 2;
  static constexpr int kTheta = 3;
  static constexpr int kSpeedState = -1;
  using State = Eigen::Matrix<double, kStates, 1>;
  using Input = Eigen::Matrix<double, kInputs, 1>;
  using StateJac = Eigen::Matrix<double, kStates, kStates>;
  using InputJac = Eigen::Matrix<double, kStates, kInputs>;

  State derivative(const State& x, const Input& u) const {
    State d;
    d << u(0) * std::cos(x(2)), u(0) * std::sin(x(2)), u(1), u(0);
    return d;
  }
  void jacobians(const State& x, const Input& u, StateJac& a, InputJac& b) const {
    a.setZero();
    b.setZero();
    const double c = std::cos(x(2)), s = std::sin(x(2));
    a(0, 2) = -u(0) * s;
    a(1, 2) = u(0) * c;
    b(0, 0) = c;
    b(1, 0) = s;
    b(2, 1) = 1.0;
    b(3, 0) = 1.0;
  }

  double speed(const State&, const Input& u) const { return u(0); }
  void speed_gradient(const State&, const Input&, State& dx, Input& du) const {
    dx.setZero();
    du << 1.0, 0.0;
  }

  Input input_lower(const VehicleLimits& l) const { return {l.v_min, -l.omega_max}; }
  Input input_upper(const VehicleLimits& l) const { return {l.v_max, l.omega_max}; }

  /// Deceleration command used when no feasible plan is available.
  Input brake(const Input& previous, const State&, double factor) const {
    return {previous(0) * factor, previous(1)};
  }
};

/// Kinematic bicycle about the rear axle. State (x, y, psi, v, theta), input (accel, steer).
struct BicycleModel {
  static constexpr int kStates = 5;
  static constexpr int kInputs = 2;
  static constexpr int kTheta = 4;
  static constexpr int kSpeedState = 3;
  using State = Eigen::Matrix<double, kStates, 1>;
  using Input = Eigen::Matrix<double, kInputs, 1>;
  using StateJac = Eigen::Matrix<double, kStates, kStates>;
  using InputJac = Eigen::Matrix<double, kStates, kInputs>;

  double wheelbase{2.7};

  State derivative(const State& x, const Input& u) const {
    State d;
    d << x(3) * std::cos(x(2)), x(3) * std::sin(x(2)), x(3) * std::tan(u(1)) / wheelbase, u(0),
        x(3);
    return d;
  }
  void jacobians(const State& x, const Input& u, StateJac& a, InputJac& b) const {
    a.setZero();
    b.setZero();
    const double c = std::cos(x(2)), s = std::sin(x(2)), t = std::tan(u(1));
    a(0, 2) = -x(3) * s;
    a(0, 3) = c;
    a(1, 2) = x(3) * c;
    a(1, 3) = s;
    a(2, 3) = t / wheelbase;
    a(4, 3) = 1.0;
    b(2, 1) = x(3) * (1.0 + t * t) / wheelbase;
    b(3, 0) = 1.0;
  }

  double speed(const State& x, const Input&) const { return x(3); }
  void speed_gradient(const State&, const Input&, State& dx, Input& du) const {
    dx.setZero();
    dx(3) = 1.0;
    du.setZero();
  }

  Input input_lower(const VehicleLimits& l) const { return {-l.accel_max, -l.steer_max}; }
  Input input_upper(const VehicleLimits& l) const { return {l.accel_max, l.steer_max}; }

  Input brake(const Input& previous, const State& x, double factor) const {
    // Decelerate so that speed shrinks by `factor` over one second.
    return {-(1.0 - factor) * x(3), previous(1)};
  }
};

template <class Model>
struct StepResult {
  typename Model::State next;
  typename Model::StateJac dx;  // d next / d state
  typename Model::InputJac du;  // d next / d input
};

/// One step of length tau with the 2-stage Gauss-Legendre method; stages are
/// solved by Newton iteration and sensitivities follow from the implicit
/// function theorem on the converged stage equations.
template <class Model>
StepResult<Model> step_dynamics(const Model& model, const typename Model::State& x,
                                const typename Model::Input& u, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("step_dynamics: tau must be > 0");
  constexpr int n = Model::kStates;
  constexpr int m = Model::kInputs;
  using State = typename Model::State;
  using Big = Eigen::Matrix<double, 2 * n, 2 * n>;
  static const double r3 = std::sqrt(3.0) / 6.0;
  const double A[2][2] = {{0.25, 0.25 - r3}, {0.25 + r3, 0.25}};

  State k1 = model.derivative(x, u), k2 = k1;
  typename Model::StateJac j1, j2;
  typename Model::InputJac b1, b2;
  Big newton;
  for (int it = 0; it < 30; ++it) {
    const State x1 = x + tau * (A[0][0] * k1 + A[0][1] * k2);
    const State x2 = x + tau * (A[1][0] * k1 + A[1][1] * k2);
    model.jacobians(x1, u, j1, b1);
    model.jacobians(x2, u, j2, b2);
    Eigen::Matrix<double, 2 * n, 1> res;
    res << k1 - model.derivative(x1, u), k2 - model.derivative(x2, u);
    newton.setIdentity();
    newton.template block<n, n>(0, 0) -= tau * A[0][0] * j1;
    newton.template block<n, n>(0, n) -= tau * A[0][1] * j1;
    newton.template block<n, n>(n, 0) -= tau * A[1][0] * j2;
    newton.template block<n, n>(n, n) -= tau * A[1][1] * j2;
    const Eigen::Matrix<double, 2 * n, 1> delta = newton.partialPivLu().solve(-res);
    k1 += delta.template head<n>();
    k2 += delta.template tail<n>();
    if (delta.cwiseAbs().maxCoeff() < 1e-15 * (1.0 + k1.cwiseAbs().maxCoeff() + k2.cwiseAbs().maxCoeff()))
      break;
  }
  // Re-linearise at the converged stages for the sensitivities.
  const State x1 = x + tau * (A[0][0] * k1 + A[0][1] * k2);
  const State x2 = x + tau * (A[1][0] * k1 + A[1][1] * k2);
  model.jacobians(x1, u, j1, b1);
  model.jacobians(x2, u, j2, b2);
  newton.setIdentity();
  newton.template block<n, n>(0, 0) -= tau * A[0][0] * j1;
  newton.template block<n, n>(0, n) -= tau * A[0][1] * j1;
  newton.template block<n, n>(n, 0) -= tau * A[1][0] * j2;
  newton.template block<n, n>(n, n) -= tau * A[1][1] * j2;
  const auto lu = newton.partialPivLu();
  Eigen::Matrix<double, 2 * n, n> rhs_x;
  rhs_x << j1, j2;
  Eigen::Matrix<double, 2 * n, m> rhs_u;
  rhs_u << b1, b2;
  const Eigen::Matrix<double, 2 * n, n> dk_dx = lu.solve(rhs_x);
  const Eigen::Matrix<double, 2 * n, m> dk_du = lu.solve(rhs_u);

  StepResult<Model> out;
  out.next = x + 0.5 * tau * (k1 + k2);
  out.dx = Model::StateJac::Identity() +
           0.5 * tau * (dk_dx.template topRows<n>() + dk_dx.template bottomRows<n>());
  out.du = 0.5 * tau * (dk_du.template topRows<n>() + dk_du.template bottomRows<n>());
  return out;
}

}  // namespace lmpcc
