// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "direct_solver.hpp"
#include "fe_space.hpp"

namespace nematic {

// Radius-controlled scheme: accept on rho > eta3, shrink below eta1,
// grow above eta2 when the step sits on the boundary.
struct TRPenaltyParams {
  double eta1 = 0.25;
  double eta2 = 0.75;
  double eta3 = 0.125;
  double c1 = 0.5;
  double c3 = 1.3;
  double delta_init = 0.3;
  double delta_inc = 0.3;
  double delta_max = 100.0;
};

// Step-scaling scheme driven by the residual norm of the stationarity
// system; w plays the role of a damping factor with a hard floor.
struct TRLagrangianParams {
  double eta1 = 0.5;
  double eta2 = 0.25;
  double w_inc = 0.1;
  double w_dec = 0.1;
  double w_lev = 0.1;
  double w_min = 0.1;
  double w_init = 0.2;
};

inline double quadratic_model(double value, const Vec& grad, const SpMat& hess,
                              const Vec& step) {
  return value + grad.dot(step) + 0.5 * step.dot(hess * step);
}

namespace detail {

// Minimize value + grad.step + step.hess.step/2 over a list of candidate
// steps; ties resolve to the earlier candidate.
inline Vec best_candidate(double value, const Vec& grad, const SpMat& hess,
                          const std::vector<Vec>& candidates) {
  double best = std::numeric_limits<double>::infinity();
  const Vec* pick = nullptr;
  for (const Vec& c : candidates) {
    const double m = quadratic_model(value, grad, hess, c);
    if (m < best) {
      best = m;
      pick = &c;
    }
  }
  return *pick;
}

}  // namespace detail

// Restriction of the model to the Newton ray: the exact minimizer when it
// fits inside the radius, otherwise the better of the two boundary points.
inline Vec tr_simple_step(const SpMat& hess, const Vec& grad,
                          const Vec& newton, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("trust radius must be positive");
  const double len = newton.norm();
  std::vector<Vec> candidates;
  if (len <= delta) candidates.push_back(newton);
  if (len > 0.0) {
    candidates.push_back((delta / len) * newton);
    candidates.push_back((-delta / len) * newton);
  } else {
    candidates.push_back(newton);  // zero gradient: stay put
  }
  return detail::best_candidate(0.0, grad, hess, candidates);
}

inline Vec tr_simple_step(const SpMat& hess, const Vec& grad, double delta) {
  const Vec newton = direct_solve(hess, Vec(-grad));
  return tr_simple_step(hess, grad, newton, delta);
}

// Two-dimensional subspace minimization over span{grad, newton}.  The
// reduced problem is solved exactly: interior stationary point when the
// reduced Hessian is definite, otherwise the boundary extremum through the
// eigen-decomposed secular equation (a quartic, solved via its companion
// matrix).  Collapse of the subspace falls back to the one-dimensional step.
inline Vec tr_2d_step(const SpMat& hess, const Vec& grad, const Vec& newton,
                      double delta) {
  if (delta <= 0.0) throw std::invalid_argument("trust radius must be positive");
  const double glen = grad.norm();
  if (glen == 0.0) return tr_simple_step(hess, grad, newton, delta);

  Eigen::Matrix<double, Eigen::Dynamic, 2> q(grad.size(), 2);
  q.col(0) = grad / glen;
  Vec p = newton - q.col(0).dot(newton) * q.col(0);
  const double plen = p.norm();
  if (plen <= 1e-12 * (newton.norm() + 1.0))
    return tr_simple_step(hess, grad, newton, delta);
  q.col(1) = p / plen;

  // reduced data: m(y) = g.y + y.H.y/2 with orthonormal columns, so the
  // Euclidean norm of y equals the norm of the full-space step
  Eigen::Vector2d g(q.col(0).dot(grad), q.col(1).dot(grad));
  Eigen::Matrix2d h;
  const Vec hq0 = hess * q.col(0);
  const Vec hq1 = hess * q.col(1);
  h(0, 0) = q.col(0).dot(hq0);
  h(0, 1) = q.col(0).dot(hq1);
  h(1, 0) = h(0, 1);
  h(1, 1) = q.col(1).dot(hq1);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
  const Eigen::Vector2d lam = es.eigenvalues();
  const Eigen::Matrix2d rot = es.eigenvectors();
  const Eigen::Vector2d b = rot.transpose() * g;

  std::vector<Eigen::Vector2d> reduced;
  // interior candidate
  if (lam(0) > 0.0 && lam(1) > 0.0) {
    Eigen::Vector2d yi(-b(0) / lam(0), -b(1) / lam(1));
    if (yi.norm() <= delta) reduced.push_back(rot * yi);
  }
  // boundary candidates: roots sigma of
  //   b1^2 (l2+s)^2 + b2^2 (l1+s)^2 = delta^2 (l1+s)^2 (l2+s)^2
  {
    const double d2 = delta * delta;
    const double b1 = b(0) * b(0), b2 = b(1) * b(1);
    const double l1 = lam(0), l2 = lam(1);
    // expand to c4 s^4 + c3 s^3 + c2 s^2 + c1 s + c0 = 0
    const double c4 = d2;
    const double c3 = 2.0 * d2 * (l1 + l2);
    const double c2 = d2 * (l1 * l1 + 4.0 * l1 * l2 + l2 * l2) - b1 - b2;
    const double c1 = 2.0 * d2 * l1 * l2 * (l1 + l2) -
                      2.0 * (b1 * l2 + b2 * l1);
    const double c0 = d2 * l1 * l1 * l2 * l2 - b1 * l2 * l2 - b2 * l1 * l1;
    Eigen::Matrix4d comp = Eigen::Matrix4d::Zero();
    comp(1, 0) = comp(2, 1) = comp(3, 2) = 1.0;
    comp(0, 3) = -c0 / c4;
    comp(1, 3) = -c1 / c4;
    comp(2, 3) = -c2 / c4;
    comp(3, 3) = -c3 / c4;
    Eigen::EigenSolver<Eigen::Matrix4d> roots(comp, false);
    const double scale = std::abs(l1) + std::abs(l2) + 1.0;
    for (int k = 0; k < 4; ++k) {
      const std::complex<double> r = roots.eigenvalues()(k);
      if (std::abs(r.imag()) > 1e-10 * (1.0 + std::abs(r.real()))) continue;
      const double s = r.real();
      const double d1v = l1 + s, d2v = l2 + s;
      if (std::abs(d1v) > 1e-12 * scale && std::abs(d2v) > 1e-12 * scale) {
        Eigen::Vector2d y(-b(0) / d1v, -b(1) / d2v);
        const double yn = y.norm();
        if (yn > 0.0 && std::abs(yn - delta) < 1e-6 * delta)
          reduced.push_back(rot * ((delta / yn) * y));
      }
    }
    // rank-deficient secular equation: a vanishing eigen-component leaves a
    // free coordinate that tops the step up to the boundary
    for (int i = 0; i < 2; ++i) {
      if (std::abs(b(i)) > 1e-12 * (std::abs(b(0)) + std::abs(b(1)))) continue;
      const int j = 1 - i;
      const double denom = lam(j) - lam(i);
      Eigen::Vector2d y = Eigen::Vector2d::Zero();
      if (std::abs(denom) > 1e-12 * scale) y(j) = -b(j) / denom;
      const double rest = delta * delta - y(j) * y(j);
      if (rest >= 0.0) {
        y(i) = std::sqrt(rest);
        reduced.push_back(rot * y);
        y(i) = -y(i);
        reduced.push_back(rot * y);
      }
    }
  }

  std::vector<Vec> candidates;
  for (const Eigen::Vector2d& y : reduced) candidates.push_back(q * y);
  // the one-dimensional candidates live in the subspace; including them
  // guarantees the 2d step is never worse
  const double nlen = newton.norm();
  if (nlen <= delta) candidates.push_back(newton);
  if (nlen > 0.0) {
    candidates.push_back((delta / nlen) * newton);
    candidates.push_back((-delta / nlen) * newton);
  }
  return detail::best_candidate(0.0, grad, hess, candidates);
}

inline Vec tr_2d_step(const SpMat& hess, const Vec& grad, double delta) {
  const Vec newton = direct_solve(hess, Vec(-grad));
  return tr_2d_step(hess, grad, newton, delta);
}

struct RhoResult {
  double rho = 0.0;
  bool degenerate = false;  // model reduction below resolution; escape rule applies
};

// rho = (actual reduction)/(predicted reduction) for the penalty functional.
inline RhoResult rho_penalty(double value, double trial_value,
                             double model_value) {
  RhoResult r;
  const double predicted = value - model_value;
  if (std::abs(predicted) < 1e-12 * (1.0 + std::abs(value))) {
    r.degenerate = true;
    return r;
  }
  r.rho = (value - trial_value) / predicted;
  return r;
}

struct AcceptAdjust {
  bool accept = false;
  double delta_next = 0.0;
};

inline AcceptAdjust tr_accept_adjust(double rho, double delta,
                                     double step_norm,
                                     const TRPenaltyParams& p) {
  AcceptAdjust out;
  out.accept = rho > p.eta3;
  if (rho < p.eta1) {
    out.delta_next = p.c1 * delta;
  } else if (rho > p.eta2 && step_norm >= delta * (1.0 - 1e-12)) {
    out.delta_next = std::min(p.c3 * delta, p.delta_max);
  } else {
    out.delta_next = delta;
  }
  return out;
}

struct LagrangianAccept {
  bool accept = false;
  double w_next = 0.0;
  double rho = 0.0;
};

// Residual-based control: rho measures the drop of ||L'|| per unit step
// scaling.  Steps at the floor w_min are taken unconditionally.
inline LagrangianAccept lagrangian_tr_accept(double residual,
                                             double trial_residual, double w,
                                             const TRLagrangianParams& p) {
  if (residual <= 0.0)
    throw std::invalid_argument("residual norm must be positive");
  LagrangianAccept out;
  out.rho = (residual - trial_residual) / (w * residual);
  const bool at_floor = w <= p.w_min * (1.0 + 1e-12);
  out.accept = out.rho > p.eta2 || at_floor;
  if (out.rho < p.eta2) {
    out.w_next = std::max(p.w_min, w - p.w_dec);
  } else if (out.rho < p.eta1) {
    out.w_next = w;
  } else {
    out.w_next = std::min(w + p.w_inc, 1.0);
  }
  return out;
}

}  // namespace nematic
