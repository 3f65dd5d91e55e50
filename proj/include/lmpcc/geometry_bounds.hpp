#pragma once

// Safe enlargement of an ellipse so that it contains the Minkowski sum of the
// ellipse with a disc of radius r.

#include "lmpcc/common.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <utility>
#include <vector>

namespace lmpcc {

struct EllipseShape {
  double a{1.0};  // semi-major
  double b{1.0};  // semi-minor

  EllipseShape() = default;
  EllipseShape(double major, double minor) : a(major), b(minor) {
    if (!std::isfinite(a) || !std::isfinite(b) || !(b > 0.0) || !(a >= b))
      throw InvalidInput("ellipse requires a >= b > 0");
  }
  /// Builds a shape from two semi-axes in either order.
  static EllipseShape normalized(double s1, double s2) {
    return {std::max(s1, s2), std::min(s1, s2)};
  }
};

enum class BoundMethod { closed_root, bisection };

struct BoundResult {
  double delta{0.0};
  double alpha{0.0};
  double beta{0.0};
  int iterations{0};
  BoundMethod method{BoundMethod::bisection};
};

struct ContainmentReport {
  bool passed{false};
  double worst_violation{0.0};  // x^2/alpha^2 + y^2/beta^2 - 1 at the worst sample, 0 when passed
  double worst_theta{0.0};
};

class BoundSolverError : public std::runtime_error {
 public:
  BoundSolverError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), bracket_lo(lo), bracket_hi(hi) {}
  double bracket_lo;
  double bracket_hi;
};

/// Point of the ellipse (+) disc boundary at ellipse parameter theta.
inline Vec2 minkowski_boundary_point(const EllipseShape& e, double r, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double norm = std::sqrt(e.b * e.b * c * c + e.a * e.a * s * s);
  return {e.a * c + r * e.b * c / norm, e.b * s + r * e.a * s / norm};
}

/// The four root expressions of the quadric-distance polynomial for the pair
/// (ellipse, ellipse enlarged by delta). Kept as a cross-check only; the
/// enlargement itself is solved against the containment oracle.
inline std::array<double, 4> lambda_roots(const EllipseShape& e, double r, double delta) {
  const double a = e.a, b = e.b;
  if (!std::isfinite(r) || !std::isfinite(delta) || r < 0.0 || delta < 0.0)
    throw InvalidInput("lambda_roots: r and delta must be finite and non-negative");
  const double den = a * a + 2.0 * a * b + 2.0 * r * a + b * b + 2.0 * r * b;
  if (!(den > 0.0)) throw InvalidInput("lambda_roots: degenerate denominator");
  const double q = r + delta;
  return {(2.0 * a * q * q * q + 2.0 * b * q * q * q + 4.0 * a * b * q * q) / den, q * q,
          4.0 * a * a + 4.0 * a * q + q * q, 4.0 * b * b + 4.0 * b * q + q * q};
}

namespace detail {

inline double containment_value(const EllipseShape& e, double r, double delta, double theta) {
  const Vec2 p = minkowski_boundary_point(e, r, theta);
  const double al = e.a + delta, be = e.b + delta;
  return p.x() * p.x() / (al * al) + p.y() * p.y() / (be * be);
}

// Golden-section maximisation of f on [lo, hi].
template <class F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double tol) {
  constexpr double g = 0.6180339887498949;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    }
  }
  const double xm = 0.5 * (lo + hi);
  return {xm, f(xm)};
}

// Minkowski boundary samples are independent of delta; a bisection reuses them.
class MinkowskiSamples {
 public:
  MinkowskiSamples(const EllipseShape& e, double r, int samples) : e_(e), r_(r) {
    if (samples < 100) throw InvalidInput("containment_check needs at least 100 samples");
    step_ = 2.0 * kPi / samples;
    x2_.resize(samples);
    y2_.resize(samples);
    for (int i = 0; i < samples; ++i) {
      const Vec2 p = minkowski_boundary_point(e, r, i * step_);
      x2_[i] = p.x() * p.x();
      y2_[i] = p.y() * p.y();
    }
  }

  ContainmentReport check(double delta) const {
    const double ia = 1.0 / ((e_.a + delta) * (e_.a + delta));
    const double ib = 1.0 / ((e_.b + delta) * (e_.b + delta));
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < x2_.size(); ++i) {
      const double v = x2_[i] * ia + y2_[i] * ib;
      if (v > best) {
        best = v;
        best_i = i;
      }
    }
    double best_theta = best_i * step_;
    auto f = [&](double th) { return containment_value(e_, r_, delta, th); };
    auto [th_ref, v_ref] = golden_max(f, best_theta - step_, best_theta + step_, 1e-12);
    if (v_ref > best) {
      best = v_ref;
      best_theta = th_ref;
    }
    ContainmentReport rep;
    rep.passed = best <= 1.0 + 1e-12;
    rep.worst_violation = rep.passed ? 0.0 : best - 1.0;
    rep.worst_theta = best_theta;
    return rep;
  }

 private:
  EllipseShape e_;
  double r_;
  double step_{0.0};
  std::vector<double> x2_, y2_;
};

}  // namespace detail

/// Samples the Minkowski boundary and checks it against the (a+delta, b+delta)
/// ellipse. The worst sample is refined by golden section.
inline ContainmentReport containment_check(const EllipseShape& e, double r, double delta,
                                           int samples = 4096) {
  return detail::MinkowskiSamples(e, r, samples).check(delta);
}

/// Smallest delta such that the (a+delta, b+delta) ellipse contains e (+) disc(r).
///
/// The Minkowski sum reaches (a+r, 0) and (0, b+r), so delta >= r, and the
/// circle of radius a+r contains it, so delta <= a - b + r. Bisection runs on
/// that bracket with the containment oracle as predicate.
inline BoundResult minimal_enlargement(const EllipseShape& e, double r, double tol = 1e-9,
                                       int max_iterations = 200) {
  if (!std::isfinite(r) || r < 0.0) throw InvalidInput("minimal_enlargement: r must be >= 0");
  if (!(tol > 0.0)) throw InvalidInput("minimal_enlargement: tol must be > 0");
  BoundResult res;
  auto finish = [&](double d) {
    res.delta = d;
    res.alpha = e.a + d;
    res.beta = e.b + d;
    return res;
  };
  const detail::MinkowskiSamples oracle(e, r, 4096);
  if (r == 0.0 || oracle.check(r).passed) {
    res.method = BoundMethod::closed_root;
    return finish(r);
  }
  double lo = r;
  double hi = e.a - e.b + r;
  while (!oracle.check(hi).passed) {
    lo = hi;
    hi *= 2.0;
    if (++res.iterations > max_iterations)
      throw BoundSolverError("minimal_enlargement: no passing upper bracket", lo, hi);
  }
  while (hi - lo > tol) {
    if (++res.iterations > max_iterations)
      throw BoundSolverError("minimal_enlargement: iteration cap reached", lo, hi);
    const double mid = 0.5 * (lo + hi);
    if (oracle.check(mid).passed)
      hi = mid;
    else
      lo = mid;
  }
  res.method = BoundMethod::bisection;
  return finish(hi);
}

/// Signed distance from a point (ellipse frame) to the ellipse boundary;
/// negative inside. One-dimensional minimisation over the ellipse parameter.
inline double ellipse_signed_distance(const EllipseShape& e, Vec2 local) {
  const double x = std::abs(local.x()), y = std::abs(local.y());
  auto d2 = [&](double t) {
    const double dx = e.a * std::cos(t) - x, dy = e.b * std::sin(t) - y;
    return dx * dx + dy * dy;
  };
  constexpr int kSamples = 64;
  const double step = 0.5 * kPi / kSamples;
  double best_t = 0.0, best = d2(0.0);
  for (int i = 1; i <= kSamples; ++i) {
    const double v = d2(i * step);
    if (v < best) {
      best = v;
      best_t = i * step;
    }
  }
  auto neg = [&](double t) { return -d2(t); };
  const double lo = std::max(0.0, best_t - step), hi = std::min(0.5 * kPi, best_t + step);
  auto [t, nv] = detail::golden_max(neg, lo, hi, 1e-12);
  const double dist = std::sqrt(std::min(best, -nv));
  const bool inside = (x * x) / (e.a * e.a) + (y * y) / (e.b * e.b) < 1.0;
  return inside ? -dist : dist;
}

/// Border-to-border distance between a disc and a rotated ellipse.
inline double disc_ellipse_clearance(Vec2 disc_center, double r_disc, Vec2 ellipse_center,
                                     double psi, const EllipseShape& e) {
  const Vec2 local = rotation(psi).transpose() * (disc_center - ellipse_center);
  return ellipse_signed_distance(e, local) - r_disc;
}

}  // namespace lmpcc
