#pragma once

// Constant-velocity tracking of moving obstacles, horizon forecasts, and the
// elliptical collision constraint.

#include "lmpcc/geometry_bounds.hpp"

#include <algorithm>
#include <map>
#include <span>
#include <tuple>
#include <vector>

namespace lmpcc {

struct EllipseObstacle {
  int id{0};
  Vec2 position{0.0, 0.0};
  Vec2 velocity{0.0, 0.0};
  double a{0.3};
  double b{0.2};
  double psi{0.0};
};

struct KalmanParams {
  double accel_std{0.5};     // m/s^2, white acceleration noise
  double meas_std{0.05};     // m
  double init_vel_std{1.0};  // m/s
};

struct KalmanTrack {
  Eigen::Vector4d state = Eigen::Vector4d::Zero();  // px, py, vx, vy
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double accel_var{0.25};
  Eigen::Matrix2d meas_cov = Eigen::Matrix2d::Identity() * 0.0025;

  Vec2 position() const { return state.head<2>(); }
  Vec2 velocity() const { return state.tail<2>(); }

  static KalmanTrack initialize(Vec2 measurement, const KalmanParams& p = {}) {
    KalmanTrack t;
    t.state << measurement, 0.0, 0.0;
    t.covariance.setZero();
    t.covariance(0, 0) = t.covariance(1, 1) = p.meas_std * p.meas_std;
    t.covariance(2, 2) = t.covariance(3, 3) = p.init_vel_std * p.init_vel_std;
    t.accel_var = p.accel_std * p.accel_std;
    t.meas_cov = Eigen::Matrix2d::Identity() * p.meas_std * p.meas_std;
    return t;
  }
};

/// One predict/update step of the constant-velocity filter.
inline KalmanTrack kalman_update(const KalmanTrack& track, Vec2 measurement, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("kalman_update: dt must be > 0");
  if (!is_psd(track.covariance, 1e-9)) throw InvalidInput("kalman_update: covariance not PSD");
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = f(1, 3) = dt;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  for (int i = 0; i < 2; ++i) {
    q(i, i) = dt4 / 4.0;
    q(i, i + 2) = q(i + 2, i) = dt3 / 2.0;
    q(i + 2, i + 2) = dt2;
  }
  q *= track.accel_var;

  KalmanTrack out = track;
  const Eigen::Vector4d xp = f * track.state;
  const Eigen::Matrix4d pp = f * track.covariance * f.transpose() + q;
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = h(1, 1) = 1.0;
  const Eigen::Matrix2d s = h * pp * h.transpose() + track.meas_cov;
  // pseudo-inverse: exact tracks with zero noise give a zero innovation covariance
  const Eigen::Matrix2d s_inv = s.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Matrix<double, 4, 2> k = pp * h.transpose() * s_inv;
  out.state = xp + k * (measurement - h * xp);
  // Joseph form keeps the covariance symmetric PSD.
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - k * h;
  out.covariance = ikh * pp * ikh.transpose() + k * track.meas_cov * k.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

struct PredictionStep {
  Vec2 position;
  double psi{0.0};
};

struct ObstaclePrediction {
  int id{0};
  std::vector<PredictionStep> steps;  // k = 0..N
  double a{0.3};
  double b{0.2};
  double alpha{0.0};  // enlarged semi-axes used in the constraint
  double beta{0.0};
};

struct PredictionOptions {
  bool minor_axis_along_velocity{true};
  double min_speed_for_heading{0.05};
};

/// Orientation of the ellipse's `a` axis for an obstacle moving with `velocity`.
inline double obstacle_orientation(Vec2 velocity, double previous_psi,
                                   const PredictionOptions& opt = {}) {
  if (velocity.norm() < opt.min_speed_for_heading) return previous_psi;
  const double heading = std::atan2(velocity.y(), velocity.x());
  return opt.minor_axis_along_velocity ? wrap_angle(heading + 0.5 * kPi) : heading;
}

/// Constant-velocity forecast over N steps of length tau with the enlarged
/// semi-axes from `bound`.
inline ObstaclePrediction predict_horizon(Vec2 position, Vec2 velocity, const EllipseObstacle& geom,
                                          int horizon_steps, double tau, const BoundResult& bound,
                                          const PredictionOptions& opt = {}) {
  ObstaclePrediction pred;
  pred.id = geom.id;
  pred.a = geom.a;
  pred.b = geom.b;
  pred.alpha = bound.alpha;
  pred.beta = bound.beta;
  const double psi = obstacle_orientation(velocity, geom.psi, opt);
  pred.steps.resize(static_cast<std::size_t>(horizon_steps) + 1);
  for (int k = 0; k <= horizon_steps; ++k) pred.steps[k] = {position + (k * tau) * velocity, psi};
  return pred;
}

inline ObstaclePrediction predict_horizon(const KalmanTrack& track, const EllipseObstacle& geom,
                                          int horizon_steps, double tau, double r_disc,
                                          const PredictionOptions& opt = {}) {
  const auto bound = minimal_enlargement(EllipseShape::normalized(geom.a, geom.b), r_disc);
  return predict_horizon(track.position(), track.velocity(), geom, horizon_steps, tau, bound, opt);
}

/// Quadratic form of the disc-centre offset in the enlarged ellipse's frame;
/// the constraint is satisfied when the value exceeds 1.
inline double dynamic_constraint(Vec2 disc_center, Vec2 obstacle_center, double psi, double alpha,
                                 double beta) {
  const Vec2 l = rotation(psi).transpose() * (disc_center - obstacle_center);
  return l.x() * l.x() / (alpha * alpha) + l.y() * l.y() / (beta * beta);
}

/// Gradient of dynamic_constraint with respect to the disc centre.
inline Vec2 dynamic_constraint_gradient(Vec2 disc_center, Vec2 obstacle_center, double psi,
                                        double alpha, double beta) {
  const Mat2 r = rotation(psi);
  const Vec2 l = r.transpose() * (disc_center - obstacle_center);
  return r * Vec2(2.0 * l.x() / (alpha * alpha), 2.0 * l.y() / (beta * beta));
}

/// Up to `limit` obstacles ordered by distance to `robot`, ties broken by id.
inline std::vector<EllipseObstacle> select_nearest(std::span<const EllipseObstacle> obstacles,
                                                   Vec2 robot, std::size_t limit = 6) {
  std::vector<EllipseObstacle> out(obstacles.begin(), obstacles.end());
  std::stable_sort(out.begin(), out.end(), [&](const auto& l, const auto& r) {
    const double dl = (l.position - robot).norm(), dr = (r.position - robot).norm();
    if (dl != dr) return dl < dr;
    return l.id < r.id;
  });
  if (out.size() > limit) out.resize(limit);
  return out;
}

/// Memoised enlargement keyed by (a, b, r).
class EnlargementCache {
 public:
  const BoundResult& get(double a, double b, double r) {
    const auto key = std::make_tuple(a, b, r);
    auto it = cache_.find(key);
    if (it == cache_.end())
      it = cache_.emplace(key, minimal_enlargement(EllipseShape::normalized(a, b), r)).first;
    return it->second;
  }

 private:
  std::map<std::tuple<double, double, double>, BoundResult> cache_;
};

/// Keeps one Kalman track per detected obstacle id.
class ObstacleTracker {
 public:
  explicit ObstacleTracker(KalmanParams params = {}) : params_(params) {}

  struct Detection {
    int id;
    Vec2 position;
    double a;
    double b;
  };

  /// Updates tracks with this cycle's detections; ids not detected are dropped.
  void update(std::span<const Detection> detections, double dt) {
    std::map<int, Entry> next;
    for (const auto& d : detections) {
      auto it = tracks_.find(d.id);
      Entry e;
      if (it == tracks_.end()) {
        e.track = KalmanTrack::initialize(d.position, params_);
        e.geometry.psi = 0.0;
      } else {
        e = it->second;
        e.track = kalman_update(e.track, d.position, dt);
      }
      e.geometry.id = d.id;
      e.geometry.a = d.a;
      e.geometry.b = d.b;
      e.geometry.position = e.track.position();
      e.geometry.velocity = e.track.velocity();
      e.geometry.psi = obstacle_orientation(e.geometry.velocity, e.geometry.psi, options_);
      next.emplace(d.id, e);
    }
    tracks_ = std::move(next);
  }

  std::vector<EllipseObstacle> obstacles() const {
    std::vector<EllipseObstacle> out;
    for (const auto& [id, e] : tracks_) out.push_back(e.geometry);
    return out;
  }

  const KalmanTrack* track(int id) const {
    auto it = tracks_.find(id);
    return it == tracks_.end() ? nullptr : &it->second.track;
  }

  void set_options(const PredictionOptions& opt) { options_ = opt; }
  const PredictionOptions& options() const { return options_; }

 private:
  struct Entry {
    KalmanTrack track;
    EllipseObstacle geometry;
  };
  KalmanParams params_;
  PredictionOptions options_;
  std::map<int, Entry> tracks_;
};

}  // namespace lmpcc
