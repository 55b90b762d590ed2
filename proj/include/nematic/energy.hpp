// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <stdexcept>

#include <Eigen/Core>

#include "fe_space.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace nematic {

// Director state at one quadrature point under the slab convention: fields
// have three components but depend on (x, y) only, so
//   div n  = dx n1 + dy n2
//   curl n = (dy n3, -dx n3, dx n2 - dy n1)
struct DirectorPoint {
  Eigen::Vector3d n, dxn, dyn;
  double div() const { return dxn[0] + dyn[1]; }
  Eigen::Vector3d curl() const { return {dyn[2], -dxn[2], dxn[1] - dyn[0]}; }
};

namespace detail {

// Visit every quadrature point of every cell with the local director state.
// fn(cell, q, weight) runs after `pt` has been filled in.
template <class Fn>
void for_each_director_point(const FESpace& sp, const Vec& n, DirectorPoint& pt,
                             Fn&& fn) {
  if (sp.family != Family::Q2Vector3 || n.size() != sp.dof_count())
    throw std::invalid_argument("director field does not match space");
  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, sp.mesh.hx(), sp.mesh.hy());
  Eigen::Matrix<double, 9, 3> local;
  for (int cell = 0; cell < sp.mesh.cell_count(); ++cell) {
    const auto nodes = sp.cell_nodes(cell);
    for (int l = 0; l < 9; ++l)
      for (int c = 0; c < 3; ++c) local(l, c) = n[sp.dof(nodes[l], c)];
    for (int q = 0; q < rule.points(); ++q) {
      pt.n = local.transpose() * basis.N.row(q).transpose();
      pt.dxn = local.transpose() * basis.dNdx.row(q).transpose();
      pt.dyn = local.transpose() * basis.dNdy.row(q).transpose();
      fn(cell, q, rule.w[q] * basis.cell_area);
    }
  }
}

inline double frank_density(const DirectorPoint& pt, const FrankConstants& fc) {
  const double dv = pt.div();
  const Eigen::Vector3d c = pt.curl();
  const double nc = pt.n.dot(c);
  // (Z c, c) = |c|^2 - (1-kappa)(n.c)^2
  return 0.5 * fc.K1 * dv * dv +
         0.5 * fc.K3 * (c.squaredNorm() - (1.0 - fc.kappa()) * nc * nc);
}

}  // namespace detail

// Free elastic energy on the 1/2-scale: int of
//   1/2 K1 (div n)^2 + 1/2 K3 (Z(n) curl n) . curl n.
// This is the value every table and report row carries; the functional the
// Newton systems minimize is twice this.
inline double frank_energy(const FESpace& sp, const Vec& n, const FrankConstants& fc) {
  double e = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(
      sp, n, pt, [&](int, int, double w) { e += w * detail::frank_density(pt, fc); });
  return e;
}

// int (n.n - 1)^2
inline double constraint_value(const FESpace& sp, const Vec& n) {
  double c = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int, int, double w) {
    const double d = pt.n.squaredNorm() - 1.0;
    c += w * d * d;
  });
  return c;
}

// P(n) = F(n) + zeta int (n.n-1)^2 with F = 2 * frank_energy.
inline double penalty_energy(const FESpace& sp, const Vec& n,
                             const FrankConstants& fc, const PenaltyConfig& pc) {
  if (pc.zeta <= 0.0) throw std::invalid_argument("penalty weight must be positive");
  double e = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int, int, double w) {
    const double d = pt.n.squaredNorm() - 1.0;
    e += w * (2.0 * detail::frank_density(pt, fc) + pc.zeta * d * d);
  });
  return e;
}

struct DeviationStats {
  double min_dev = 0.0;
  double max_dev = 0.0;
};

// Extrema of n.n - 1 over all quadrature points of the mesh.
inline DeviationStats deviation_stats(const FESpace& sp, const Vec& n) {
  DeviationStats s{std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int, int, double) {
    const double d = pt.n.squaredNorm() - 1.0;
    s.min_dev = std::min(s.min_dev, d);
    s.max_dev = std::max(s.max_dev, d);
  });
  return s;
}

// Flexoelectric functional on the F-scale (no 1/2 on the elastic part):
//   K1 |div n|^2 + K3 (Z curl n, curl n)
//   - eps0 eps_perp |grad phi|^2 - eps0 eps_a (n . grad phi)^2
//   + 2 e_s (div n)(n . grad phi) + 2 e_b (n x curl n) . grad phi.
// The elastic part on the reporting scale is frank_energy(n) separately.
inline double flexo_energy(const FESpace& nsp, const Vec& n, const FESpace& psp,
                           const Vec& phi, const FrankConstants& fc,
                           const ElectricConstants& ec) {
  if (psp.family != Family::Q2Scalar || phi.size() != psp.dof_count())
    throw std::invalid_argument("potential field does not match space");
  if (psp.mesh.nx != nsp.mesh.nx || psp.mesh.ny != nsp.mesh.ny ||
      psp.mesh.periodic_x != nsp.mesh.periodic_x)
    throw std::invalid_argument("director and potential meshes differ");

  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, psp.mesh.hx(), psp.mesh.hy());
  Eigen::Matrix<double, 9, 1> lphi;

  double e = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(nsp, n, pt, [&](int cell, int q, double w) {
    if (q == 0) {
      const auto nodes = psp.cell_nodes(cell);
      for (int l = 0; l < 9; ++l) lphi[l] = phi[psp.dof(nodes[l], 0)];
    }
    const Eigen::Vector3d gphi(basis.dNdx.row(q) * lphi, basis.dNdy.row(q) * lphi, 0.0);
    const double dv = pt.div();
    const Eigen::Vector3d c = pt.curl();
    const double nc = pt.n.dot(c);
    const double ng = pt.n.dot(gphi);
    double d = fc.K1 * dv * dv +
               fc.K3 * (c.squaredNorm() - (1.0 - fc.kappa()) * nc * nc);
    d -= ec.eps0 * ec.eps_perp * gphi.squaredNorm();
    d -= ec.eps0 * ec.eps_a() * ng * ng;
    d += 2.0 * ec.e_s * dv * ng;
    d += 2.0 * ec.e_b * pt.n.cross(c).dot(gphi);
    e += w * d;
  });
  return e;
}

}  // namespace nematic
