#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lmpcc {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = std::numbers::pi;

/// Thrown when an operation receives arguments outside its domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline Mat2 rotation(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

/// Derivative of rotation(psi) with respect to psi.
inline Mat2 rotation_derivative(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat2 r;
  r << -s, -c, c, -s;
  return r;
}

/// Symmetric PSD square root, L with L^T L = Q.
inline Mat2 psd_sqrt(const Mat2& q) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (q + q.transpose()));
  Eigen::Vector2d d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline bool is_psd(const Eigen::MatrixXd& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff() >= -tol * (1.0 + m.cwiseAbs().maxCoeff());
}

}  // namespace lmpcc
