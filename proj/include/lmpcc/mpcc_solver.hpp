#pragma once

// Receding-horizon contouring problem: cost terms, collision constraints and a
// Gauss-Newton SQP over multiple-shooting variables.

#include "lmpcc/dynamics.hpp"
#include "lmpcc/free_space.hpp"
#include "lmpcc/obstacle_tracking.hpp"
#include "lmpcc/qp_solver.hpp"
#include "lmpcc/reference_path.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace lmpcc {

struct Weights {
  Mat2 q_eps = Vec2(5.0, 5.0).asDiagonal();  // contour, lag
  double q_v{1.0};
  double q_r{0.1};
  Mat2 q_u = Vec2(0.02, 0.2).asDiagonal();
  double gamma{0.01};
  double q_track{5.0};  // position weight of the tracking-cost mode

  void validate() const {
    if (!is_psd(q_eps, 1e-12) || !is_psd(q_u, 1e-12)) throw InvalidInput("Weights: Q matrices must be PSD");
    if (q_v < 0.0 || q_r < 0.0 || gamma < 0.0 || q_track < 0.0)
      throw InvalidInput("Weights: scalar weights must be >= 0");
    if (q_r > 0.0 && gamma == 0.0) throw InvalidInput("Weights: gamma must be > 0 when Q_R > 0");
  }
};

struct Footprint {
  std::vector<Vec2> offsets{Vec2::Zero()};
  double r_disc{0.3};

  /// n discs spaced along a length x width rectangle centred on the body origin.
  static Footprint covering(double length, double width, int n) {
    if (n < 1 || !(length > 0.0) || !(width > 0.0)) throw InvalidInput("Footprint: bad rectangle");
    Footprint f;
    f.offsets.clear();
    const double half = length / (2.0 * n);
    for (int j = 0; j < n; ++j) f.offsets.emplace_back(-0.5 * length + half * (2 * j + 1), 0.0);
    f.r_disc = std::hypot(half, 0.5 * width);
    return f;
  }
};

enum class SolveStatus { optimal, max_iter, infeasible };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max_iter";
    default: return "infeasible";
  }
}

enum class CostMode { contouring, tracking };

struct SolverOptions {
  int max_iterations{10};
  double kkt_tolerance{1e-4};
  double rho{1e4};             // soft-constraint penalty
  double defect_weight{1e4};   // merit weight on dynamics defects
  double ls_factor{0.5};
  int ls_max_trials{8};
  double infeasible_tolerance{1e-3};
  double dynamic_margin{0.0};  // added to the enlarged semi-axes
};

template <class Model>
struct HorizonPlan {
  std::vector<typename Model::State> states;  // z_0..z_N, theta last
  std::vector<typename Model::Input> inputs;  // u_0..u_{N-1}
  double cost{0.0};
  SolveStatus status{SolveStatus::max_iter};
  double solve_ms{0.0};
  int iterations{0};
  double kkt{0.0};
  double max_violation{0.0};
  double max_defect{0.0};
  std::vector<double> merit_history;

  std::vector<double> theta() const {
    std::vector<double> t;
    for (const auto& z : states) t.push_back(z(Model::kTheta));
    return t;
  }
  std::vector<Vec2> positions() const {
    std::vector<Vec2> p;
    for (const auto& z : states) p.emplace_back(z(0), z(1));
    return p;
  }
};

/// Contour and lag error of position p against the reference point.
inline Vec2 error_vector(Vec2 p, const ReferencePoint& ref) {
  const double s = std::sin(ref.phi), c = std::cos(ref.phi);
  Mat2 e;
  e << s, -c, -c, -s;
  return e * (p - ref.position);
}

/// Derivatives of error_vector with respect to p (2x2) and theta (2x1).
inline void error_jacobian(Vec2 p, const ReferencePoint& ref, Mat2& de_dp, Vec2& de_dtheta) {
  const double s = std::sin(ref.phi), c = std::cos(ref.phi);
  de_dp << s, -c, -c, -s;
  Mat2 de_dphi;
  de_dphi << c, s, s, -c;
  de_dtheta = ref.dphi * (de_dphi * (p - ref.position)) - de_dp * ref.d1;
}

template <class Model>
struct SolverProblem {
  Model model{};
  typename Model::State x0 = Model::State::Zero();
  double tau{0.2};
  int horizon{15};
  CostMode mode{CostMode::contouring};
  const LocalReference* reference{nullptr};
  double v_ref{1.0};
  std::vector<Vec2> track_targets;       // tracking mode, stages 0..N
  std::vector<ConvexRegion> regions;     // stages 1..N
  std::vector<ObstaclePrediction> predictions;
  Weights weights{};
  VehicleLimits limits{};
  Footprint footprint{};
  SolverOptions options{};

  void validate() const {
    if (horizon < 1) throw InvalidInput("SolverProblem: horizon must be >= 1");
    if (!(tau > 0.0)) throw InvalidInput("SolverProblem: tau must be > 0");
    if (footprint.offsets.empty()) throw InvalidInput("SolverProblem: footprint needs a disc");
    weights.validate();
    if (mode == CostMode::contouring && reference == nullptr)
      throw InvalidInput("SolverProblem: contouring mode needs a reference");
    if (mode == CostMode::tracking && track_targets.size() != static_cast<std::size_t>(horizon) + 1)
      throw InvalidInput("SolverProblem: tracking targets must cover stages 0..N");
    if (!regions.empty() && regions.size() != static_cast<std::size_t>(horizon))
      throw InvalidInput("SolverProblem: need one region per stage 1..N");
    for (const auto& p : predictions)
      if (p.steps.size() != static_cast<std::size_t>(horizon) + 1)
        throw InvalidInput("SolverProblem: prediction length must be N+1");
  }
};

/// Least-squares residual r of stage k, with J_k = |r|^2. Terminal stage (k = N)
/// has no input, so speed and input terms are dropped there.
template <class Model>
void stage_residuals(const SolverProblem<Model>& pb, int k, const typename Model::State& x,
                     const typename Model::Input* u, Eigen::VectorXd& r, Eigen::MatrixXd& jx,
                     Eigen::MatrixXd& ju) {
  constexpr int n = Model::kStates;
  constexpr int m = Model::kInputs;
  const bool terminal = (u == nullptr);
  const int n_obs = static_cast<int>(pb.predictions.size());
  const int rows = 2 + n_obs + (terminal ? 0 : (pb.mode == CostMode::contouring ? 1 : 0) + m);
  r.setZero(rows);
  jx.setZero(rows, n);
  ju.setZero(rows, m);
  const Vec2 p(x(0), x(1));
  int row = 0;

  if (pb.mode == CostMode::contouring) {
    const Mat2 l = psd_sqrt(pb.weights.q_eps);
    const ReferencePoint ref = pb.reference->evaluate(x(Model::kTheta));
    Mat2 de_dp;
    Vec2 de_dt;
    error_jacobian(p, ref, de_dp, de_dt);
    r.segment<2>(row) = l * error_vector(p, ref);
    jx.block<2, 2>(row, 0) = l * de_dp;
    jx.block<2, 1>(row, Model::kTheta) = l * de_dt;
  } else {
    const double w = std::sqrt(pb.weights.q_track);
    r.segment<2>(row) = w * (p - pb.track_targets[static_cast<std::size_t>(k)]);
    jx.block<2, 2>(row, 0) = w * Mat2::Identity();
  }
  row += 2;

  for (const auto& pred : pb.predictions) {
    const Vec2 d = p - pred.steps[static_cast<std::size_t>(k)].position;
    const double q = d.squaredNorm() + pb.weights.gamma;
    if (pb.weights.q_r > 0.0) {
      const double v = std::sqrt(pb.weights.q_r / q);
      r(row) = v;
      jx.block<1, 2>(row, 0) = (-v / q * d).transpose();
    }
    ++row;
  }
  if (terminal) return;

  if (pb.mode == CostMode::contouring) {
    const double sq = std::sqrt(pb.weights.q_v);
    typename Model::State gx;
    typename Model::Input gu;
    pb.model.speed_gradient(x, *u, gx, gu);
    r(row) = sq * (pb.v_ref - pb.model.speed(x, *u));
    jx.row(row) = -sq * gx.transpose();
    ju.row(row) = -sq * gu.transpose();
    ++row;
  }
  static_assert(m == 2, "input weight is 2x2");
  const Mat2 lu = psd_sqrt(pb.weights.q_u);
  r.segment<m>(row) = lu * (*u);
  ju.block<m, m>(row, 0) = lu;
}

/// Stage cost J(z, u, theta) = tracking + speed + repulsive + input (terminal:
/// tracking + repulsive).
template <class Model>
double stage_cost(const SolverProblem<Model>& pb, int k, const typename Model::State& x,
                  const typename Model::Input* u) {
  Eigen::VectorXd r;
  Eigen::MatrixXd jx, ju;
  stage_residuals(pb, k, x, u, r, jx, ju);
  return r.squaredNorm();
}

/// Inequality residuals c >= 0 at stage k (1..N): four halfspaces per disc,
/// one ellipse condition per obstacle and disc, and soft speed bounds for
/// models with a speed state.
template <class Model>
void stage_constraints(const SolverProblem<Model>& pb, int k, const typename Model::State& x,
                       Eigen::VectorXd& c, Eigen::MatrixXd& cx) {
  constexpr int n = Model::kStates;
  const int nc = static_cast<int>(pb.footprint.offsets.size());
  const bool has_region = !pb.regions.empty();
  const int n_obs = static_cast<int>(pb.predictions.size());
  const int speed_rows = Model::kSpeedState >= 0 ? 2 : 0;
  const int rows = (has_region ? 4 * nc : 0) + n_obs * nc + speed_rows;
  c.setZero(rows);
  cx.setZero(rows, n);
  const double psi = x(2);
  const Vec2 p(x(0), x(1));
  const Mat2 dr = rotation_derivative(psi);
  int row = 0;
  for (int j = 0; j < nc; ++j) {
    const Vec2 off = pb.footprint.offsets[static_cast<std::size_t>(j)];
    const Vec2 dc = disc_center(p, psi, off);
    const Vec2 dc_dpsi = dr * off;
    if (has_region) {
      const auto& reg = pb.regions[static_cast<std::size_t>(k - 1)];
      for (int s = 0; s < 4; ++s) {
        const auto& h = reg.sides[static_cast<std::size_t>(s)];
        c(row) = h.residual(dc);
        cx(row, 0) = -h.normal.x();
        cx(row, 1) = -h.normal.y();
        cx(row, 2) = -h.normal.dot(dc_dpsi);
        ++row;
      }
    }
    for (const auto& pred : pb.predictions) {
      const auto& st = pred.steps[static_cast<std::size_t>(k)];
      const double al = pred.alpha + pb.options.dynamic_margin;
      const double be = pred.beta + pb.options.dynamic_margin;
      c(row) = dynamic_constraint(dc, st.position, st.psi, al, be) - 1.0;
      const Vec2 g = dynamic_constraint_gradient(dc, st.position, st.psi, al, be);
      cx(row, 0) = g.x();
      cx(row, 1) = g.y();
      cx(row, 2) = g.dot(dc_dpsi);
      ++row;
    }
  }
  if constexpr (Model::kSpeedState >= 0) {
    c(row) = x(Model::kSpeedState) - pb.limits.v_min;
    cx(row, Model::kSpeedState) = 1.0;
    c(row + 1) = pb.limits.v_max - x(Model::kSpeedState);
    cx(row + 1, Model::kSpeedState) = -1.0;
  }
}

template <class Model>
struct PlanEvaluation {
  double cost{0.0};
  double violation{0.0};      // sum of constraint violations
  double max_violation{0.0};
  double defects{0.0};        // sum of |defect| entries
  double max_defect{0.0};
};

template <class Model>
PlanEvaluation<Model> evaluate_plan(const SolverProblem<Model>& pb,
                                    const std::vector<typename Model::State>& xs,
                                    const std::vector<typename Model::Input>& us) {
  PlanEvaluation<Model> ev;
  const int N = pb.horizon;
  Eigen::VectorXd c;
  Eigen::MatrixXd cx;
  for (int k = 0; k <= N; ++k) {
    ev.cost += stage_cost(pb, k, xs[k], k < N ? &us[k] : nullptr);
    if (k >= 1) {
      stage_constraints(pb, k, xs[k], c, cx);
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double v = std::max(0.0, -c(i));
        ev.violation += v;
        ev.max_violation = std::max(ev.max_violation, v);
      }
    }
    if (k < N) {
      const auto st = step_dynamics(pb.model, xs[k], us[k], pb.tau);
      const auto d = (st.next - xs[k + 1]).cwiseAbs();
      ev.defects += d.sum();
      ev.max_defect = std::max(ev.max_defect, d.maxCoeff());
    }
  }
  return ev;
}

/// States obtained by integrating the inputs from x0.
template <class Model>
std::vector<typename Model::State> rollout(const Model& model, const typename Model::State& x0,
                                           const std::vector<typename Model::Input>& us, double tau) {
  std::vector<typename Model::State> xs{x0};
  for (const auto& u : us) xs.push_back(step_dynamics(model, xs.back(), u, tau).next);
  return xs;
}

/// Warm start from a previous plan advanced by `shift` steps (fractional),
/// with the last input held and the states re-integrated from x0.
template <class Model>
HorizonPlan<Model> shift_plan(const HorizonPlan<Model>& prev, const typename Model::State& x0,
                              double shift, const Model& model, double tau) {
  HorizonPlan<Model> out;
  const int N = static_cast<int>(prev.inputs.size());
  for (int k = 0; k < N; ++k) {
    const double t = std::min(k + shift, static_cast<double>(N - 1));
    const int i0 = static_cast<int>(std::floor(t));
    const int i1 = std::min(i0 + 1, N - 1);
    const double w = t - i0;
    out.inputs.push_back((1.0 - w) * prev.inputs[i0] + w * prev.inputs[i1]);
  }
  out.states = rollout(model, x0, out.inputs, tau);
  return out;
}

namespace detail {
inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

/// SQP with Gauss-Newton Hessian. Each iteration condenses the linearised
/// multiple-shooting system onto the input steps, solves the soft-constrained
/// QP and backtracks on the L1 merit
///   cost + rho * violation + defect_weight * |defects|.
/// The KKT measure is the decrease of that merit predicted by the QP model.
template <class Model>
HorizonPlan<Model> solve(const SolverProblem<Model>& pb,
                         const HorizonPlan<Model>* warm_start = nullptr) {
  using State = typename Model::State;
  using Input = typename Model::Input;
  constexpr int n = Model::kStates;
  constexpr int m = Model::kInputs;
  const auto t0 = std::chrono::steady_clock::now();
  pb.validate();
  const int N = pb.horizon;
  const auto& opt = pb.options;
  const Input lo = pb.model.input_lower(pb.limits), hi = pb.model.input_upper(pb.limits);

  std::vector<Input> us;
  std::vector<State> xs;
  if (warm_start && static_cast<int>(warm_start->inputs.size()) == N &&
      static_cast<int>(warm_start->states.size()) == N + 1) {
    us = warm_start->inputs;
    xs = warm_start->states;
  } else {
    us.assign(static_cast<std::size_t>(N), Input::Zero());
    xs.clear();
  }
  for (auto& u : us) u = u.cwiseMax(lo).cwiseMin(hi);
  if (xs.empty()) xs = rollout(pb.model, pb.x0, us, pb.tau);
  xs[0] = pb.x0;

  auto merit_of = [&](const PlanEvaluation<Model>& ev) {
    return ev.cost + opt.rho * ev.violation + opt.defect_weight * ev.defects;
  };

  HorizonPlan<Model> plan;
  PlanEvaluation<Model> ev = evaluate_plan(pb, xs, us);
  double merit = merit_of(ev);
  plan.merit_history.push_back(merit);

  const int nu = m * N;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n * (N + 1), nu);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n * (N + 1));
  Eigen::VectorXd r;
  Eigen::MatrixXd jx, ju, cx;
  Eigen::VectorXd c;
  bool converged = false;
  int iter = 0;
  double kkt = std::numeric_limits<double>::infinity();

  for (; iter < opt.max_iterations; ++iter) {
    // condensing: dx_{k+1} = A_k dx_k + B_k du_k + defect_k, dx_0 = 0
    G.setZero();
    g.setZero();
    for (int k = 0; k < N; ++k) {
      const auto st = step_dynamics(pb.model, xs[k], us[k], pb.tau);
      G.middleRows(n * (k + 1), n) = st.dx * G.middleRows(n * k, n);
      G.block(n * (k + 1), m * k, n, m) += st.du;
      g.segment<n>(n * (k + 1)) = st.dx * g.segment<n>(n * k) + (st.next - xs[k + 1]);
    }

    // Gauss-Newton cost rows
    std::vector<Eigen::MatrixXd> mrows;
    std::vector<Eigen::VectorXd> rrows;
    Eigen::Index total_rows = 0;
    for (int k = 0; k <= N; ++k) {
      stage_residuals(pb, k, xs[k], k < N ? &us[k] : nullptr, r, jx, ju);
      Eigen::MatrixXd mk = jx * G.middleRows(n * k, n);
      if (k < N) mk.middleCols(m * k, m) += ju;
      rrows.push_back(r + jx * g.segment<n>(n * k));
      mrows.push_back(std::move(mk));
      total_rows += r.size();
    }
    Eigen::MatrixXd M(total_rows, nu);
    Eigen::VectorXd r0(total_rows);
    for (Eigen::Index k = 0, row = 0; k < static_cast<Eigen::Index>(mrows.size()); ++k) {
      M.middleRows(row, mrows[k].rows()) = mrows[k];
      r0.segment(row, rrows[k].size()) = rrows[k];
      row += rrows[k].size();
    }

    // constraint rows: stage constraints (soft), input bounds (hard)
    std::vector<Eigen::MatrixXd> arows;
    std::vector<Eigen::VectorXd> brows;
    Eigen::Index n_soft = 0;
    for (int k = 1; k <= N; ++k) {
      stage_constraints(pb, k, xs[k], c, cx);
      if (c.size() == 0) continue;
      arows.push_back(cx * G.middleRows(n * k, n));
      brows.push_back(c + cx * g.segment<n>(n * k));
      n_soft += c.size();
    }
    QpProblem qp;
    qp.rho = opt.rho;
    qp.A.resize(n_soft + 2 * nu, nu);
    qp.b.resize(n_soft + 2 * nu);
    qp.soft.assign(static_cast<std::size_t>(n_soft + 2 * nu), 0);
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < arows.size(); ++i) {
      qp.A.middleRows(row, arows[i].rows()) = arows[i];
      qp.b.segment(row, brows[i].size()) = brows[i];
      for (Eigen::Index j = 0; j < brows[i].size(); ++j) qp.soft[static_cast<std::size_t>(row + j)] = 1;
      row += brows[i].size();
    }
    qp.A.bottomRows(2 * nu).setZero();
    for (int k = 0; k < N; ++k)
      for (int j = 0; j < m; ++j) {
        const Eigen::Index col = m * k + j;
        qp.A(row, col) = 1.0;  // du >= lo - u
        qp.b(row) = us[k](j) - lo(j);
        qp.A(row + 1, col) = -1.0;  // du <= hi - u
        qp.b(row + 1) = hi(j) - us[k](j);
        row += 2;
      }
    qp.H = 2.0 * M.transpose() * M;
    qp.c = 2.0 * M.transpose() * r0;
    const QpResult sol = solve_qp(qp);
    const Eigen::VectorXd& du = sol.d;

    // predicted merit decrease of the model
    const Eigen::VectorXd lin = qp.A.topRows(n_soft) * du + qp.b.head(n_soft);
    const double model_new = (r0 + M * du).squaredNorm() + opt.rho * (-lin).cwiseMax(0.0).sum();
    kkt = std::max(0.0, merit - model_new);
    if (kkt < opt.kkt_tolerance && ev.max_defect < 1e-6) {
      converged = true;
      break;
    }

    double alpha = 1.0;
    bool accepted = false;
    for (int t = 0; t < opt.ls_max_trials; ++t) {
      std::vector<State> xt;
      std::vector<Input> ut(us);
      for (int k = 0; k < N; ++k) ut[k] = (us[k] + alpha * du.segment<m>(m * k)).cwiseMax(lo).cwiseMin(hi);
      xt = rollout(pb.model, pb.x0, ut, pb.tau);
      const auto et = evaluate_plan(pb, xt, ut);
      const double mt = merit_of(et);
      if (mt <= merit - 1e-4 * alpha * kkt) {
        xs.swap(xt);
        us.swap(ut);
        ev = et;
        merit = mt;
        accepted = true;
        break;
      }
      alpha *= opt.ls_factor;
    }
    plan.merit_history.push_back(merit);
    if (!accepted) {
      ++iter;
      break;
    }
  }

  // Return a dynamically consistent plan.
  xs = rollout(pb.model, pb.x0, us, pb.tau);
  ev = evaluate_plan(pb, xs, us);
  plan.states = std::move(xs);
  plan.inputs = std::move(us);
  plan.cost = ev.cost;
  plan.iterations = iter;
  plan.kkt = kkt;
  plan.max_violation = ev.max_violation;
  plan.max_defect = ev.max_defect;
  if (ev.max_violation > opt.infeasible_tolerance)
    plan.status = SolveStatus::infeasible;
  else
    plan.status = converged ? SolveStatus::optimal : SolveStatus::max_iter;
  plan.solve_ms = detail::elapsed_ms(t0);
  return plan;
}

}  // namespace lmpcc
