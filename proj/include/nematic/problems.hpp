// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "energy.hpp"
#include "fe_space.hpp"
#include "model.hpp"

namespace nematic {

// A benchmark configuration: material constants, Dirichlet traces on the
// two y-walls, and (when known) the closed-form solution and the reference
// energy of the equilibrium state.
struct ProblemSpec {
  std::string name;
  FrankConstants fc{};
  ElectricConstants ec{};
  bool with_potential = false;
  bool periodic_x = true;
  std::function<Eigen::Vector3d(double)> trace_bottom;  // y = 0
  std::function<Eigen::Vector3d(double)> trace_top;     // y = 1
  std::function<Eigen::Vector3d(double, double)> analytic;  // null if unknown
  double reference_energy = std::numeric_limits<double>::quiet_NaN();
};

// Uniform twist between opposite wall angles +-theta0 about the x-axis;
// its director is the known equilibrium for any one-constant slab.
inline ProblemSpec twist_problem() {
  const double t0 = M_PI / 8.0;
  ProblemSpec p;
  p.name = "twist";
  p.fc = {1.0, 1.2, 1.0};
  p.trace_bottom = [t0](double) {
    return Eigen::Vector3d(std::cos(t0), 0.0, -std::sin(t0));
  };
  p.trace_top = [t0](double) {
    return Eigen::Vector3d(std::cos(t0), 0.0, std::sin(t0));
  };
  p.analytic = [t0](double, double y) {
    const double th = t0 * (2.0 * y - 1.0);
    return Eigen::Vector3d(std::cos(th), 0.0, std::sin(th));
  };
  p.reference_energy = 2.0 * p.fc.K2 * t0 * t0;
  return p;
}

// Same wall anchoring at a steeper angle and unequal constants; the
// minimizer picks up a tilt component and is only known implicitly.
inline ProblemSpec tilt_twist_problem() {
  const double t0 = M_PI / 4.0;
  ProblemSpec p;
  p.name = "tilt_twist";
  p.fc = {1.0, 3.0, 1.2};
  p.trace_bottom = [t0](double) {
    return Eigen::Vector3d(std::cos(t0), 0.0, -std::sin(t0));
  };
  p.trace_top = [t0](double) {
    return Eigen::Vector3d(std::cos(t0), 0.0, std::sin(t0));
  };
  p.reference_energy = 3.59294;
  return p;
}

namespace detail {

// In-plane anchoring angle of the striped pattern, period 1 in x.
inline double nano_angle(double x) {
  const double r = 0.25;
  const double s = 0.95;
  const double a = 2.0 * M_PI * (x + r);
  const double xm = -s * std::sin(a) / (-s * std::cos(a) - 1.0);
  const double xp = -s * std::sin(a) / (-s * std::cos(a) + 1.0);
  return r * (M_PI + 2.0 * std::atan(xm) - 2.0 * std::atan(xp));
}

inline Eigen::Vector3d nano_trace(double x) {
  const double a = nano_angle(x);
  return {0.0, std::cos(a), std::sin(a)};
}

}  // namespace detail

// Striped nano-patterned anchoring, identical on both walls.
inline ProblemSpec nano_problem() {
  ProblemSpec p;
  p.name = "nano";
  p.fc = {1.0, 0.62903, 1.32258};
  p.trace_bottom = [](double x) { return detail::nano_trace(x); };
  p.trace_top = [](double x) { return detail::nano_trace(x); };
  p.reference_energy = 3.89001;
  return p;
}

// Doubled nano pattern (two stripes across the period) with electric
// coupling; the potential is grounded on both walls.
inline ProblemSpec flexo_problem() {
  ProblemSpec p;
  p.name = "flexo";
  p.fc = {1.0, 4.0, 1.0};
  p.ec = {1.42809, 7.0, 7.0, 1.5, -1.5};
  p.with_potential = true;
  auto doubled = [](double x) {
    double t = std::fmod(2.0 * x, 1.0);
    if (t < 0.0) t += 1.0;
    return detail::nano_trace(t);
  };
  p.trace_bottom = doubled;
  p.trace_top = doubled;
  p.reference_energy = 16.413;
  return p;
}

// Nodal initial guess: linear blend of the wall traces in y, an optional
// symmetry-breaking n2 bump, then normalization.  Wall nodes reproduce the
// traces exactly (the bump vanishes at y = 0, 1).
inline Vec initial_director(const FESpace& sp, const ProblemSpec& prob,
                            double perturb = 0.0) {
  if (sp.family != Family::Q2Vector3)
    throw std::invalid_argument("initial guess needs a director space");
  Vec n(sp.dof_count());
  for (int id = 0; id < sp.mesh.node_count(); ++id) {
    const auto xy = sp.mesh.node_xy(id);
    Eigen::Vector3d v = (1.0 - xy[1]) * prob.trace_bottom(xy[0]) +
                        xy[1] * prob.trace_top(xy[0]);
    v[1] += perturb * std::sin(M_PI * xy[1]);
    const double len = v.norm();
    if (len < 1e-12)
      throw std::domain_error("degenerate blend of wall traces");
    v /= len;
    for (int c = 0; c < 3; ++c) n[3 * id + c] = v[c];
  }
  return n;
}

// sqrt of the integrated squared difference against the closed-form field.
inline double l2_error(const FESpace& sp, const Vec& n,
                       const std::function<Eigen::Vector3d(double, double)>& analytic) {
  if (!analytic)
    throw std::invalid_argument("problem has no analytic solution");
  if (sp.family != Family::Q2Vector3 || n.size() != sp.dof_count())
    throw std::invalid_argument("director field does not match space");
  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, sp.mesh.hx(), sp.mesh.hy());
  const double hx = sp.mesh.hx(), hy = sp.mesh.hy();

  double acc = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int cell, int q, double w) {
    const int cx = cell % sp.mesh.nx;
    const int cy = cell / sp.mesh.nx;
    const double x = (cx + rule.x[q]) * hx;
    const double y = (cy + rule.y[q]) * hy;
    acc += w * (pt.n - analytic(x, y)).squaredNorm();
  });
  return std::sqrt(acc);
}

inline double l2_error(const FESpace& sp, const Vec& n,
                       const ProblemSpec& prob) {
  return l2_error(sp, n, prob.analytic);
}

}  // namespace nematic
