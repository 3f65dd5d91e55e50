#pragma once

// Dense primal-dual interior point method (Mehrotra predictor-corrector) for
//   min 1/2 d'Hd + c'd + rho * sum(s)   s.t.  A d + b + s >= 0 on soft rows,
//                                             A d + b     >= 0 on hard rows, s >= 0.

#include "lmpcc/common.hpp"

#include <vector>

namespace lmpcc {

struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<char> soft;  // one flag per row of A
  double rho{1e4};
};

struct QpResult {
  Eigen::VectorXd d;
  Eigen::VectorXd lambda;  // row multipliers
  Eigen::VectorXd slack;   // soft-row relaxation, zero on hard rows
  int iterations{0};
  bool converged{false};
};

struct QpOptions {
  int max_iterations{60};
  double tolerance{1e-9};
  double fraction_to_boundary{0.995};
  double regularization{1e-10};
};

namespace detail {

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const std::vector<char>* mask) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (mask && !(*mask)[static_cast<std::size_t>(i)]) continue;
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

}  // namespace detail

inline QpResult solve_qp(const QpProblem& qp, const QpOptions& opt = {}) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index m = qp.A.rows();
  if (qp.H.cols() != n || qp.c.size() != n || qp.A.cols() != n || qp.b.size() != m ||
      qp.soft.size() != static_cast<std::size_t>(m))
    throw InvalidInput("solve_qp: dimension mismatch");
  if (!(qp.rho > 0.0)) throw InvalidInput("solve_qp: rho must be > 0");

  using Eigen::VectorXd;
  const auto& soft = qp.soft;
  Eigen::ArrayXd sf(m);
  for (Eigen::Index i = 0; i < m; ++i) sf(i) = soft[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  const double n_comp = static_cast<double>(m) + sf.sum();

  QpResult res;
  VectorXd d = VectorXd::Zero(n);
  VectorXd s = sf.matrix();                  // soft slack
  VectorXd w = (qp.b + s).cwiseMax(1.0);     // row slack
  VectorXd lam = VectorXd::Ones(m);
  VectorXd mu = (sf * std::max(qp.rho - 1.0, 1.0)).matrix();
  // Hard rows carry s = mu = 0 and are excluded from the soft updates.

  if (m == 0) {
    Eigen::MatrixXd k = qp.H;
    k.diagonal().array() += opt.regularization;
    res.d = k.ldlt().solve(-qp.c);
    res.lambda = VectorXd();
    res.slack = VectorXd();
    res.converged = true;
    return res;
  }

  const double scale_c = 1.0 + qp.c.cwiseAbs().maxCoeff();
  const double scale_b = 1.0 + qp.b.cwiseAbs().maxCoeff();
  VectorXd rd(n), rp(m), rs(m), rc1(m), rc2(m), dd(n), dl(m), dw(m), ds(m), dm(m), dinv(m), e(m);
  Eigen::MatrixXd kmat(n, n);

  auto residuals = [&] {
    rd = qp.H * d + qp.c - qp.A.transpose() * lam;
    rp = qp.A * d + qp.b + s - w;
    rs = (sf * (qp.rho - lam.array() - mu.array())).matrix();
  };
  auto factor = [&] {
    for (Eigen::Index i = 0; i < m; ++i) {
      double di = w(i) / lam(i);
      if (sf(i) > 0.0) di += s(i) / mu(i);
      dinv(i) = 1.0 / di;
    }
    kmat = qp.H;
    kmat.noalias() += qp.A.transpose() * dinv.asDiagonal() * qp.A;
    kmat.diagonal().array() += opt.regularization;
    return kmat.ldlt();
  };
  auto direction = [&](const auto& ldlt) {
    for (Eigen::Index i = 0; i < m; ++i) {
      e(i) = -rp(i) - rc1(i) / lam(i);
      if (sf(i) > 0.0) e(i) += (rc2(i) + s(i) * rs(i)) / mu(i);
    }
    dd = ldlt.solve(-rd + qp.A.transpose() * (dinv.array() * e.array()).matrix());
    dl = (dinv.array() * (e - qp.A * dd).array()).matrix();
    dw = ((-rc1.array() - w.array() * dl.array()) / lam.array()).matrix();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (sf(i) > 0.0) {
        dm(i) = rs(i) - dl(i);
        ds(i) = (-rc2(i) - s(i) * dm(i)) / mu(i);
      } else {
        dm(i) = 0.0;
        ds(i) = 0.0;
      }
    }
  };
  auto step_lengths = [&](double& ap, double& ad) {
    const std::vector<char>* mask = &soft;
    ap = std::min(detail::max_step(w, dw, nullptr), detail::max_step(s, ds, mask));
    ad = std::min(detail::max_step(lam, dl, nullptr), detail::max_step(mu, dm, mask));
  };

  for (int it = 0; it < opt.max_iterations; ++it) {
    residuals();
    const double gap = (w.dot(lam) + s.dot(mu)) / n_comp;
    res.iterations = it;
    if (rd.cwiseAbs().maxCoeff() <= opt.tolerance * scale_c &&
        rp.cwiseAbs().maxCoeff() <= opt.tolerance * scale_b &&
        rs.cwiseAbs().maxCoeff() <= opt.tolerance * qp.rho && gap <= opt.tolerance) {
      res.converged = true;
      break;
    }
    const auto ldlt = factor();

    // predictor
    rc1 = (w.array() * lam.array()).matrix();
    rc2 = (s.array() * mu.array()).matrix();
    direction(ldlt);
    double ap, ad;
    step_lengths(ap, ad);
    const double gap_aff = ((w + ap * dw).dot(lam + ad * dl) + (s + ap * ds).dot(mu + ad * dm)) / n_comp;
    const double sigma = std::pow(gap_aff / gap, 3);

    // corrector
    rc1 = (w.array() * lam.array() + dw.array() * dl.array() - sigma * gap).matrix();
    rc2 = (sf * (s.array() * mu.array() + ds.array() * dm.array() - sigma * gap)).matrix();
    direction(ldlt);
    step_lengths(ap, ad);
    ap = std::min(1.0, opt.fraction_to_boundary * ap);
    ad = std::min(1.0, opt.fraction_to_boundary * ad);
    d += ap * dd;
    w += ap * dw;
    s += ap * ds;
    lam += ad * dl;
    mu += ad * dm;
    res.iterations = it + 1;
  }
  res.d = d;
  res.lambda = lam;
  res.slack = s;
  return res;
}

}  // namespace lmpcc
