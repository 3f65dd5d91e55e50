#pragma once

// Global reference path as chord-length cubic segments, the sigmoid-blended
// local reference used by the controller, and progress estimation.

#include "lmpcc/common.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

namespace lmpcc {

struct PathSegment {
  Eigen::Vector4d coeffs_x;  // a1 t^3 + a2 t^2 + a3 t + a4, t in [0, length]
  Eigen::Vector4d coeffs_y;
  double length{0.0};
  double v_ref{1.0};
  double start{0.0};  // cumulative path parameter at t = 0

  Vec2 position(double t) const {
    return {((coeffs_x[0] * t + coeffs_x[1]) * t + coeffs_x[2]) * t + coeffs_x[3],
            ((coeffs_y[0] * t + coeffs_y[1]) * t + coeffs_y[2]) * t + coeffs_y[3]};
  }
  Vec2 first_derivative(double t) const {
    return {(3.0 * coeffs_x[0] * t + 2.0 * coeffs_x[1]) * t + coeffs_x[2],
            (3.0 * coeffs_y[0] * t + 2.0 * coeffs_y[1]) * t + coeffs_y[2]};
  }
  Vec2 second_derivative(double t) const {
    return {6.0 * coeffs_x[0] * t + 2.0 * coeffs_x[1], 6.0 * coeffs_y[0] * t + 2.0 * coeffs_y[1]};
  }
};

class ReferencePath {
 public:
  ReferencePath() = default;
  ReferencePath(std::vector<Vec2> waypoints, std::vector<PathSegment> segments)
      : waypoints_(std::move(waypoints)), segments_(std::move(segments)) {}

  const std::vector<Vec2>& waypoints() const { return waypoints_; }
  const std::vector<PathSegment>& segments() const { return segments_; }
  std::size_t segment_count() const { return segments_.size(); }
  double total_length() const {
    return segments_.empty() ? 0.0 : segments_.back().start + segments_.back().length;
  }

  /// Index of the segment containing theta, clamped to the valid range.
  std::size_t segment_index(double theta) const {
    std::size_t i = 0;
    while (i + 1 < segments_.size() && theta >= segments_[i + 1].start) ++i;
    return i;
  }

  /// Piecewise evaluation (no blending). Outside [0, total] the end segments extrapolate.
  Vec2 position(double theta) const {
    const auto& s = segments_[segment_index(theta)];
    return s.position(theta - s.start);
  }
  Vec2 tangent(double theta) const {
    const auto& s = segments_[segment_index(theta)];
    return s.first_derivative(theta - s.start);
  }

  /// Copy with a straight segment of `length` appended along the end tangent.
  /// Natural end conditions make the extension curvature-continuous.
  ReferencePath extended(double length) const {
    if (!(length > 0.0)) return *this;
    ReferencePath out = *this;
    const auto& last = segments_.back();
    const Vec2 end = last.position(last.length);
    const Vec2 dir = last.first_derivative(last.length).normalized();
    PathSegment ext;
    ext.coeffs_x << 0.0, 0.0, dir.x(), end.x();
    ext.coeffs_y << 0.0, 0.0, dir.y(), end.y();
    ext.length = length;
    ext.v_ref = last.v_ref;
    ext.start = last.start + last.length;
    out.segments_.push_back(ext);
    out.waypoints_.push_back(end + length * dir);
    return out;
  }

 private:
  std::vector<Vec2> waypoints_;
  std::vector<PathSegment> segments_;
};

namespace detail {

// Second derivatives of a natural cubic spline (Thomas algorithm).
inline std::vector<double> natural_spline_moments(std::span<const double> knots,
                                                  std::span<const double> values) {
  const std::size_t n = knots.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = knots[i] - knots[i - 1], h1 = knots[i + 1] - knots[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
  }
  // Forward sweep; the sub-diagonal entry of row i equals h_{i-1} = upper[i-1].
  for (std::size_t i = 1; i < diag.size(); ++i) {
    const double w = upper[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t k = diag.size(); k-- > 0;) {
    const double next = (k + 1 < diag.size()) ? m[k + 2] : 0.0;
    m[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
  }
  return m;
}

}  // namespace detail

/// Natural cubic spline through the waypoints, parameterised per segment by
/// chord length. `v_ref` holds one value per waypoint (or a single value).
inline ReferencePath fit_segments(std::span<const Vec2> waypoints, std::span<const double> v_ref) {
  const std::size_t n = waypoints.size();
  if (n < 2) throw InvalidInput("fit_segments: need at least two waypoints");
  if (v_ref.size() != 1 && v_ref.size() != n)
    throw InvalidInput("fit_segments: v_ref must have one entry or one per waypoint");
  std::vector<double> knots(n, 0.0), xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = waypoints[i].x();
    ys[i] = waypoints[i].y();
    if (i > 0) {
      const double d = (waypoints[i] - waypoints[i - 1]).norm();
      if (!(d > 1e-9)) throw InvalidInput("fit_segments: duplicate consecutive waypoints");
      knots[i] = knots[i - 1] + d;
    }
  }
  const auto mx = detail::natural_spline_moments(knots, xs);
  const auto my = detail::natural_spline_moments(knots, ys);
  std::vector<PathSegment> segs(n - 1);
  auto coeffs = [](double y0, double y1, double m0, double m1, double h) {
    Eigen::Vector4d c;
    c << (m1 - m0) / (6.0 * h), 0.5 * m0, (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0, y0;
    return c;
  };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = knots[i + 1] - knots[i];
    auto& s = segs[i];
    s.coeffs_x = coeffs(xs[i], xs[i + 1], mx[i], mx[i + 1], h);
    s.coeffs_y = coeffs(ys[i], ys[i + 1], my[i], my[i + 1], h);
    s.length = h;
    s.start = knots[i];
    s.v_ref = v_ref.size() == 1 ? v_ref[0] : v_ref[i];
    if (!(s.v_ref > 0.0)) throw InvalidInput("fit_segments: v_ref must be > 0");
  }
  return {std::vector<Vec2>(waypoints.begin(), waypoints.end()), std::move(segs)};
}

/// Reference point of the blended local path and its derivatives in theta.
struct ReferencePoint {
  Vec2 position;
  Vec2 d1;  // d p / d theta
  Vec2 d2;
  double phi{0.0};   // path direction
  double dphi{0.0};  // d phi / d theta
};

/// Local reference built from segments [first, last] of a path, joined by
/// products of sigmoids. The outer edges of the window stay open so the first
/// and last segments extend past the window ends.
class LocalReference {
 public:
  LocalReference(const ReferencePath& path, std::size_t first, std::size_t eta,
                 double epsilon = 0.02)
      : path_(&path), epsilon_(epsilon) {
    if (path.segment_count() == 0) throw InvalidInput("LocalReference: empty path");
    if (!(epsilon > 0.0)) throw InvalidInput("LocalReference: epsilon must be > 0");
    first_ = std::min(first, path.segment_count() - 1);
    last_ = std::min(first_ + std::max<std::size_t>(eta, 1), path.segment_count() - 1);
  }

  std::size_t first() const { return first_; }
  std::size_t last() const { return last_; }
  double epsilon() const { return epsilon_; }
  double window_start() const { return path_->segments()[first_].start; }
  double window_end() const {
    const auto& s = path_->segments()[last_];
    return s.start + s.length;
  }
  /// Reference speed of the segment at which the window starts.
  double v_ref() const { return path_->segments()[first_].v_ref; }

  ReferencePoint evaluate(double theta) const {
    ReferencePoint out;
    out.position.setZero();
    out.d1.setZero();
    out.d2.setZero();
    const double cutoff = 40.0 * epsilon_;
    for (std::size_t i = first_; i <= last_; ++i) {
      const auto& seg = path_->segments()[i];
      const double s0 = seg.start, s1 = seg.start + seg.length;
      const bool open_lo = (i == first_), open_hi = (i == last_);
      if ((!open_lo && theta < s0 - cutoff) || (!open_hi && theta > s1 + cutoff)) continue;
      double up = 1.0, dup = 0.0, ddup = 0.0;
      if (!open_lo) sigmoid((theta - s0) / epsilon_, 1.0 / epsilon_, up, dup, ddup);
      double dn = 1.0, ddn = 0.0, dddn = 0.0;
      if (!open_hi) sigmoid((s1 - theta) / epsilon_, -1.0 / epsilon_, dn, ddn, dddn);
      const double w = up * dn;
      const double dw = dup * dn + up * ddn;
      const double ddw = ddup * dn + 2.0 * dup * ddn + up * dddn;
      const double t = theta - s0;
      const Vec2 p = seg.position(t), p1 = seg.first_derivative(t), p2 = seg.second_derivative(t);
      out.position += w * p;
      out.d1 += dw * p + w * p1;
      out.d2 += ddw * p + 2.0 * dw * p1 + w * p2;
    }
    out.phi = std::atan2(out.d1.y(), out.d1.x());
    const double n2 = out.d1.squaredNorm();
    out.dphi = n2 > 0.0 ? (out.d1.x() * out.d2.y() - out.d1.y() * out.d2.x()) / n2 : 0.0;
    return out;
  }

 private:
  // s(u) with u = u0 and du/dtheta = k; returns value and first two theta-derivatives.
  static void sigmoid(double u, double k, double& v, double& dv, double& ddv) {
    v = 1.0 / (1.0 + std::exp(-u));
    const double s1 = v * (1.0 - v);
    dv = s1 * k;
    ddv = s1 * (1.0 - 2.0 * v) * k * k;
  }

  const ReferencePath* path_;
  std::size_t first_{0};
  std::size_t last_{0};
  double epsilon_;
};

struct ProgressEstimate {
  double theta{0.0};
  std::size_t segment{0};
};

namespace detail {

template <class F>
double golden_min(F&& f, double lo, double hi, double tol) {
  constexpr double g = 0.6180339887498949;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 > f2) {
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
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Closest path parameter to `position`. With a previous estimate the search
/// is confined to one segment length either side of it; otherwise the whole
/// path is scanned on a 0.1 m grid. Both refine by golden section to 1e-4 m.
inline ProgressEstimate estimate_theta0(const ReferencePath& path, Vec2 position,
                                        std::optional<double> previous = std::nullopt) {
  const double total = path.total_length();
  double lo = 0.0, hi = total, grid = 0.1;
  if (previous) {
    const double prev = std::clamp(*previous, 0.0, total);
    const double half = std::max(path.segments()[path.segment_index(prev)].length, 0.5);
    lo = std::max(0.0, prev - half);
    hi = std::min(total, prev + half);
    grid = 0.05;
  }
  auto dist2 = [&](double th) { return (path.position(th) - position).squaredNorm(); };
  const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / grid)));
  const double h = (hi - lo) / steps;
  int best = 0;
  double best_d = dist2(lo);
  for (int i = 1; i <= steps; ++i) {
    const double d = dist2(lo + i * h);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const double a = std::max(lo, lo + (best - 1) * h), b = std::min(hi, lo + (best + 1) * h);
  double theta = detail::golden_min(dist2, a, b, 1e-4);
  if (dist2(lo + best * h) < dist2(theta)) theta = lo + best * h;
  return {theta, path.segment_index(theta)};
}

struct EtaSelection {
  std::size_t eta{1};
  bool sufficient{true};  // false when the path end truncates the window
  double covered{0.0};    // sum of the segment lengths m+1 .. m+eta
};

/// Smallest eta with tau * N * v_max <= sum of the lengths of segments m+1 .. m+eta.
inline EtaSelection select_eta(const ReferencePath& path, std::size_t m, int horizon_steps,
                               double tau, double v_max) {
  if (!(v_max > 0.0)) throw InvalidInput("select_eta: v_max must be > 0");
  const double need = tau * horizon_steps * v_max;
  const auto& segs = path.segments();
  EtaSelection sel;
  sel.eta = 0;
  double covered = 0.0;
  for (std::size_t i = m + 1; i < segs.size(); ++i) {
    covered += segs[i].length;
    ++sel.eta;
    if (need <= covered) {
      sel.covered = covered;
      return sel;
    }
  }
  sel.covered = covered;
  sel.sufficient = false;
  return sel;
}

}  // namespace lmpcc
