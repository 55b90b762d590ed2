// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mesh.hpp"
#include "quadrature.hpp"

namespace nematic {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class Family {
  Q2Vector3,  // director fields: 3 components per node, node-major interleaved
  Q2Scalar,   // electric potential
  P0          // cellwise-constant Lagrange multiplier
};

namespace detail {

// 1D quadratic Lagrange basis on [0,1] with nodes {0, 1/2, 1}.
inline double lag1(int i, double t) {
  switch (i) {
    case 0: return (2.0 * t - 1.0) * (t - 1.0);
    case 1: return 4.0 * t * (1.0 - t);
    default: return t * (2.0 * t - 1.0);
  }
}

inline double dlag1(int i, double t) {
  switch (i) {
    case 0: return 4.0 * t - 3.0;
    case 1: return 4.0 - 8.0 * t;
    default: return 4.0 * t - 1.0;
  }
}

}  // namespace detail

struct FESpace {
  Mesh mesh;
  Family family = Family::Q2Vector3;
  int ncomp = 3;  // dofs per entity (node or cell)

  int entity_count() const {
    return family == Family::P0 ? mesh.cell_count() : mesh.node_count();
  }
  int dof_count() const { return ncomp * entity_count(); }

  int dof(int entity, int comp = 0) const { return ncomp * entity + comp; }

  // Nodes of cell (cx, cy) in local order l = 3*b + a, a fastest:
  // a, b in {0,1,2} index the 1D Lagrange nodes along x and y.
  std::array<int, 9> cell_nodes(int cell) const {
    const int cx = cell % mesh.nx;
    const int cy = cell / mesh.nx;
    std::array<int, 9> n;
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a)
        n[3 * b + a] = mesh.node_id(2 * cx + a, 2 * cy + b);
    return n;
  }

  // Dofs pinned by the Dirichlet walls (all components of wall nodes).
  std::vector<int> wall_dofs() const {
    std::vector<int> out;
    if (family == Family::P0) return out;
    for (int id = 0; id < mesh.node_count(); ++id)
      if (mesh.node_on_wall(id))
        for (int c = 0; c < ncomp; ++c) out.push_back(dof(id, c));
    return out;
  }
};

inline FESpace make_space(const Mesh& m, Family f) {
  int ncomp = f == Family::Q2Vector3 ? 3 : 1;
  return FESpace{m, f, ncomp};
}

// Shape values and physical derivatives of the 9 Q2 basis functions at each
// quadrature point.  Cells are congruent rectangles, so one table serves the
// whole mesh.
struct Q2Basis {
  Eigen::MatrixXd N;     // (qp, 9)
  Eigen::MatrixXd dNdx;  // (qp, 9)
  Eigen::MatrixXd dNdy;  // (qp, 9)
  double cell_area = 0.0;
};

inline Q2Basis q2_basis(const QuadratureRule& rule, double hx, double hy) {
  const int nq = rule.points();
  Q2Basis b;
  b.N.resize(nq, 9);
  b.dNdx.resize(nq, 9);
  b.dNdy.resize(nq, 9);
  b.cell_area = hx * hy;
  for (int q = 0; q < nq; ++q)
    for (int lb = 0; lb < 3; ++lb)
      for (int la = 0; la < 3; ++la) {
        const int l = 3 * lb + la;
        b.N(q, l) = detail::lag1(la, rule.x[q]) * detail::lag1(lb, rule.y[q]);
        b.dNdx(q, l) = detail::dlag1(la, rule.x[q]) / hx * detail::lag1(lb, rule.y[q]);
        b.dNdy(q, l) = detail::lag1(la, rule.x[q]) * detail::dlag1(lb, rule.y[q]) / hy;
      }
  return b;
}

namespace detail {

// Locate the cell containing (x, y) and its reference coordinates.  x wraps
// when periodic; both coordinates must otherwise lie in the closed domain.
struct CellPoint {
  int cell;
  double xi, eta;
};

inline CellPoint locate(const Mesh& m, double x, double y) {
  constexpr double tol = 1e-12;
  if (m.periodic_x) {
    x = std::fmod(x, m.lx);
    if (x < 0.0) x += m.lx;
  } else if (x < -tol || x > m.lx + tol) {
    throw std::invalid_argument("evaluation point outside domain");
  }
  if (y < -tol || y > m.ly + tol)
    throw std::invalid_argument("evaluation point outside domain");
  int cx = std::min(static_cast<int>(x / m.hx()), m.nx - 1);
  int cy = std::min(static_cast<int>(y / m.hy()), m.ny - 1);
  cx = std::max(cx, 0);
  cy = std::max(cy, 0);
  return {cy * m.nx + cx, x / m.hx() - cx, y / m.hy() - cy};
}

}  // namespace detail

// Pointwise evaluation of one component of a Q2 field.
inline double eval_component(const FESpace& sp, const Vec& u, int comp,
                             double x, double y) {
  if (sp.family == Family::P0) {
    const auto cp = detail::locate(sp.mesh, x, y);
    return u[sp.dof(cp.cell, comp)];
  }
  const auto cp = detail::locate(sp.mesh, x, y);
  const auto nodes = sp.cell_nodes(cp.cell);
  double v = 0.0;
  for (int lb = 0; lb < 3; ++lb)
    for (int la = 0; la < 3; ++la)
      v += detail::lag1(la, cp.xi) * detail::lag1(lb, cp.eta) *
           u[sp.dof(nodes[3 * lb + la], comp)];
  return v;
}

inline Eigen::Vector3d eval_director(const FESpace& sp, const Vec& n,
                                     double x, double y) {
  return {eval_component(sp, n, 0, x, y), eval_component(sp, n, 1, x, y),
          eval_component(sp, n, 2, x, y)};
}

// Scalar grid-transfer matrix from a space to its uniform refinement.  Rows
// are fine entities, columns coarse entities.  For Q2 the weights are the
// coarse basis evaluated at the fine node (at most 9 per row, the quarter
// points of a coarse cell carry the 1D stencils {3/8, 3/4, -1/8}); for P0 a
// child cell inherits its parent's value.
inline SpMat prolongation_matrix(const FESpace& coarse, const FESpace& fine) {
  const Mesh& mc = coarse.mesh;
  const Mesh& mf = fine.mesh;
  if (coarse.family != fine.family || mf.nx != 2 * mc.nx || mf.ny != 2 * mc.ny ||
      mf.periodic_x != mc.periodic_x)
    throw std::invalid_argument("prolongation needs a space and its refinement");

  std::vector<Triplet> trips;
  if (coarse.family == Family::P0) {
    trips.reserve(mf.cell_count());
    for (int cy = 0; cy < mf.ny; ++cy)
      for (int cx = 0; cx < mf.nx; ++cx)
        trips.emplace_back(cy * mf.nx + cx, (cy / 2) * mc.nx + cx / 2, 1.0);
    SpMat P(mf.cell_count(), mc.cell_count());
    P.setFromTriplets(trips.begin(), trips.end());
    return P;
  }

  // Fine node column ixf sits at coarse reference coordinate ixf/4 within
  // coarse cell floor(ixf/4); even indices coincide with a coarse column.
  auto stencil_1d = [](int ixf, int coarse_cols, bool wrap,
                       std::array<std::pair<int, double>, 3>& out) -> int {
    if (ixf % 2 == 0) {
      out[0] = {ixf / 2, 1.0};
      return 1;
    }
    const int cell = ixf / 4;
    const double xi = 0.25 * (ixf - 4 * cell);
    for (int a = 0; a < 3; ++a) {
      int col = 2 * cell + a;
      if (wrap) col %= coarse_cols;
      out[a] = {col, detail::lag1(a, xi)};
    }
    return 3;
  };

  trips.reserve(static_cast<size_t>(mf.node_count()) * 4);
  std::array<std::pair<int, double>, 3> sx, sy;
  for (int iyf = 0; iyf < mf.node_rows(); ++iyf) {
    const int ny_terms = stencil_1d(iyf, mc.node_rows(), false, sy);
    for (int ixf = 0; ixf < mf.node_cols(); ++ixf) {
      const int nx_terms = stencil_1d(ixf, mc.node_cols(), mc.periodic_x, sx);
      const int row = mf.node_id(ixf, iyf);
      for (int j = 0; j < ny_terms; ++j)
        for (int i = 0; i < nx_terms; ++i)
          trips.emplace_back(row, sy[j].first * mc.node_cols() + sx[i].first,
                             sx[i].second * sy[j].second);
    }
  }
  SpMat P(mf.node_count(), mc.node_count());
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

// Transfer a coefficient vector onto the refined space, componentwise through
// the scalar prolongation.  Exact for every field in the coarse space.
inline Vec interpolate(const FESpace& coarse, const FESpace& fine, const Vec& u) {
  if (u.size() != coarse.dof_count())
    throw std::invalid_argument("coefficient size does not match space");
  const SpMat P = prolongation_matrix(coarse, fine);
  if (coarse.ncomp == 1) return P * u;
  Vec out(fine.dof_count());
  Vec uc(coarse.entity_count()), uf(fine.entity_count());
  for (int c = 0; c < coarse.ncomp; ++c) {
    for (int e = 0; e < coarse.entity_count(); ++e) uc[e] = u[coarse.dof(e, c)];
    uf = P * uc;
    for (int e = 0; e < fine.entity_count(); ++e) out[fine.dof(e, c)] = uf[e];
  }
  return out;
}

// Nodal interpolant of an analytic field (componentwise callback).
template <class F>
Vec project_nodal(const FESpace& sp, F&& f) {
  if (sp.family == Family::P0) {
    Vec u(sp.dof_count());
    for (int cy = 0; cy < sp.mesh.ny; ++cy)
      for (int cx = 0; cx < sp.mesh.nx; ++cx) {
        const double x = (cx + 0.5) * sp.mesh.hx();
        const double y = (cy + 0.5) * sp.mesh.hy();
        for (int c = 0; c < sp.ncomp; ++c)
          u[sp.dof(cy * sp.mesh.nx + cx, c)] = f(c, x, y);
      }
    return u;
  }
  Vec u(sp.dof_count());
  for (int id = 0; id < sp.mesh.node_count(); ++id) {
    const auto xy = sp.mesh.node_xy(id);
    for (int c = 0; c < sp.ncomp; ++c) u[sp.dof(id, c)] = f(c, xy[0], xy[1]);
  }
  return u;
}

}  // namespace nematic
