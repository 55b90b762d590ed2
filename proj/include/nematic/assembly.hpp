// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "energy.hpp"
#include "fe_space.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace nematic {

namespace detail {

// Sorted neighbor-node lists (self included): the scalar sparsity pattern
// shared by every assembled operator on a given mesh.
struct NodeAdjacency {
  std::vector<int> ptr;  // size nodes+1
  std::vector<int> idx;
};

inline NodeAdjacency node_adjacency(const FESpace& sp) {
  const int nodes = sp.mesh.node_count();
  std::vector<int> count(nodes, 0);
  for (int cell = 0; cell < sp.mesh.cell_count(); ++cell)
    for (int n : sp.cell_nodes(cell)) count[n] += 9;
  NodeAdjacency adj;
  adj.ptr.assign(nodes + 1, 0);
  for (int i = 0; i < nodes; ++i) adj.ptr[i + 1] = adj.ptr[i] + count[i];
  adj.idx.resize(adj.ptr.back());
  std::vector<int> fill(adj.ptr.begin(), adj.ptr.end() - 1);
  for (int cell = 0; cell < sp.mesh.cell_count(); ++cell) {
    const auto ns = sp.cell_nodes(cell);
    for (int a : ns)
      for (int b : ns) adj.idx[fill[a]++] = b;
  }
  // sort and deduplicate each row, then compact
  std::vector<int> compact;
  compact.reserve(adj.idx.size());
  std::vector<int> nptr(nodes + 1, 0);
  for (int i = 0; i < nodes; ++i) {
    auto first = adj.idx.begin() + adj.ptr[i];
    auto last = adj.idx.begin() + adj.ptr[i + 1];
    std::sort(first, last);
    auto end = std::unique(first, last);
    nptr[i + 1] = nptr[i] + static_cast<int>(end - first);
    compact.insert(compact.end(), first, end);
  }
  adj.ptr = std::move(nptr);
  adj.idx = std::move(compact);
  return adj;
}

// Column-compressed accumulator over the fixed node-block pattern: column
// ncomp*j+c holds rows ncomp*i+r for every neighbor i of j.  Entries are
// located by binary search, so scatter-add never reallocates; this is what
// keeps assembly within memory reach on the largest grids.
class PatternAccumulator {
 public:
  PatternAccumulator(const NodeAdjacency& adj, int nodes, int ncomp)
      : ncomp_(ncomp) {
    const int n = nodes * ncomp;
    m_.resize(n, n);
    m_.makeCompressed();
    const long nnz = static_cast<long>(adj.idx.size()) * ncomp * ncomp;
    m_.resizeNonZeros(nnz);
    auto* outer = m_.outerIndexPtr();
    auto* inner = m_.innerIndexPtr();
    auto* vals = m_.valuePtr();
    long pos = 0;
    for (int node = 0; node < nodes; ++node)
      for (int c = 0; c < ncomp; ++c) {
        outer[node * ncomp + c] = static_cast<int>(pos);
        for (int k = adj.ptr[node]; k < adj.ptr[node + 1]; ++k)
          for (int r = 0; r < ncomp; ++r) inner[pos++] = adj.idx[k] * ncomp + r;
      }
    outer[nodes * ncomp] = static_cast<int>(pos);
    std::fill(vals, vals + nnz, 0.0);
  }

  void add(int r, int c, double v) {
    const auto* outer = m_.outerIndexPtr();
    const auto* inner = m_.innerIndexPtr();
    const int* first = inner + outer[c];
    const int* last = inner + outer[c + 1];
    const int* it = std::lower_bound(first, last, r);
    m_.valuePtr()[it - inner] += v;
  }

  void set_unit_diagonal(const std::vector<int>& dofs) {
    for (int d : dofs) add(d, d, 1.0);
  }

  // swap, not move: Eigen 3.4 sparse matrices deep-copy on std::move
  SpMat take() {
    SpMat out;
    out.swap(m_);
    return out;
  }

 private:
  SpMat m_;
  int ncomp_;
};

// Per-quadrature-point tables for the 27 (or 36 with potential) local test
// functions, indexed k = ncomp*l + c for local node l and component c; the
// director components carry v = e_c N_l, component 3 the potential psi = N_l.
struct LocalBasis {
  std::array<double, 36> N{}, D{};      // shape value, div
  std::array<Eigen::Vector3d, 36> C{};  // curl
};

}  // namespace detail

// Interleaved saddle system: u dofs are ncomp per node (components 0..2 the
// director, component 3 the potential when present), multipliers one per
// cell.  A holds every u-u block of the Newton matrix (for the flexo system
// that includes the director-potential coupling and the negated dielectric
// block); B couples u to the multipliers.  Dirichlet dofs are eliminated to
// identity rows/columns in A, zero rows in B, zero rhs entries.
struct BlockSystem {
  int ncomp = 3;
  int nodes = 0;
  int cells = 0;
  SpMat A;
  SpMat B;
  Vec f;                    // u-segment of the rhs
  Vec g;                    // multiplier segment (empty when cells == 0)
  std::vector<char> fixed;  // u-dof elimination mask

  BlockSystem() = default;
  BlockSystem(const BlockSystem&) = default;
  BlockSystem& operator=(const BlockSystem&) = default;
  // routed through swap because Eigen 3.4 sparse matrices deep-copy on move
  BlockSystem(BlockSystem&& o) noexcept { swap(o); }
  BlockSystem& operator=(BlockSystem&& o) noexcept {
    swap(o);
    return *this;
  }
  void swap(BlockSystem& o) noexcept {
    std::swap(ncomp, o.ncomp);
    std::swap(nodes, o.nodes);
    std::swap(cells, o.cells);
    A.swap(o.A);
    B.swap(o.B);
    f.swap(o.f);
    g.swap(o.g);
    fixed.swap(o.fixed);
  }

  int udofs() const { return ncomp * nodes; }
  int size() const { return udofs() + cells; }
  bool has_multiplier() const { return cells > 0; }

  // Full matrix [[A, B], [B^T, 0]]; multiplier diagonal is structurally zero.
  SpMat monolithic() const {
    std::vector<Triplet> trips;
    trips.reserve(A.nonZeros() + 2 * B.nonZeros());
    for (int j = 0; j < A.outerSize(); ++j)
      for (SpMat::InnerIterator it(A, j); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < B.outerSize(); ++j)
      for (SpMat::InnerIterator it(B, j); it; ++it) {
        trips.emplace_back(it.row(), udofs() + it.col(), it.value());
        trips.emplace_back(udofs() + it.col(), it.row(), it.value());
      }
    SpMat K(size(), size());
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
  }

  Vec rhs() const {
    Vec r(size());
    r.head(udofs()) = f;
    if (cells > 0) r.tail(cells) = g;
    return r;
  }

  // Named sub-blocks of the u-u matrix, for inspection and tests.
  SpMat component_block(int cr, int cc) const {
    std::vector<Triplet> trips;
    for (int j = 0; j < A.outerSize(); ++j) {
      if (j % ncomp != cc) continue;
      for (SpMat::InnerIterator it(A, j); it; ++it)
        if (it.row() % ncomp == cr)
          trips.emplace_back(it.row() / ncomp, j / ncomp, it.value());
    }
    SpMat M(nodes, nodes);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
  }
};

namespace detail {

inline void fill_local_basis(const Q2Basis& basis, int q, int ncomp,
                             LocalBasis& lb) {
  for (int l = 0; l < 9; ++l) {
    const double N = basis.N(q, l);
    const double dx = basis.dNdx(q, l);
    const double dy = basis.dNdy(q, l);
    for (int c = 0; c < 3; ++c) {
      const int k = ncomp * l + c;
      lb.N[k] = N;
      lb.D[k] = c == 0 ? dx : (c == 1 ? dy : 0.0);
      // curl of e_c N: see DirectorPoint
      switch (c) {
        case 0: lb.C[k] = {0.0, 0.0, -dy}; break;
        case 1: lb.C[k] = {0.0, 0.0, dx}; break;
        default: lb.C[k] = {dy, -dx, 0.0}; break;
      }
    }
    if (ncomp == 4) {
      const int k = 4 * l + 3;
      lb.N[k] = N;
      lb.D[k] = 0.0;
      lb.C[k].setZero();
    }
  }
}

inline std::vector<char> fixed_mask(const FESpace& sp, int ncomp) {
  std::vector<char> fixed(static_cast<size_t>(ncomp) * sp.mesh.node_count(), 0);
  for (int id = 0; id < sp.mesh.node_count(); ++id)
    if (sp.mesh.node_on_wall(id))
      for (int c = 0; c < ncomp; ++c) fixed[ncomp * id + c] = 1;
  return fixed;
}

}  // namespace detail

// Residual of the penalty functional: entry per test function v,
//   2K1(div n, div v) + 2K3(Z curl n, curl v)
//   + 2(K2-K3)(n . curl n, v . curl n) + 4 zeta (v . n, n.n - 1),
// zeroed at Dirichlet dofs.
inline Vec assemble_penalty_gradient(const FESpace& sp, const Vec& n,
                                     const FrankConstants& fc, const PenaltyConfig& pc) {
  if (pc.zeta < 0.0) throw std::invalid_argument("penalty weight must be nonnegative");
  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, sp.mesh.hx(), sp.mesh.hy());
  const double kappa = fc.kappa();

  Vec grad = Vec::Zero(sp.dof_count());
  detail::LocalBasis lb;
  Eigen::Matrix<double, 27, 1> ge;
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int cell, int q, double w) {
    if (q == 0) ge.setZero();
    detail::fill_local_basis(basis, q, 3, lb);
    const double divn = pt.div();
    const Eigen::Vector3d cn = pt.curl();
    const double ncn = pt.n.dot(cn);
    const double dev = pt.n.squaredNorm() - 1.0;
    const Eigen::Vector3d zcn = cn - (1.0 - kappa) * ncn * pt.n;
    for (int k = 0; k < 27; ++k) {
      const int comp = k % 3;
      const double vcn = lb.N[k] * cn[comp];
      const double vn = lb.N[k] * pt.n[comp];
      ge[k] += w * (2.0 * fc.K1 * divn * lb.D[k] + 2.0 * fc.K3 * zcn.dot(lb.C[k]) +
                    2.0 * (fc.K2 - fc.K3) * ncn * vcn + 4.0 * pc.zeta * dev * vn);
    }
    if (q == rule.points() - 1) {
      const auto nodes = sp.cell_nodes(cell);
      for (int l = 0; l < 9; ++l)
        for (int c = 0; c < 3; ++c) {
          const int dof = sp.dof(nodes[l], c);
          if (!sp.mesh.node_on_wall(nodes[l])) grad[dof] += ge[3 * l + c];
        }
    }
  });
  return grad;
}

// Second derivative of the penalty functional at n (all seven elastic terms
// plus the two unit-length terms), assembled symmetric with eliminated
// Dirichlet rows/columns.
inline SpMat assemble_penalty_hessian(const FESpace& sp, const Vec& n,
                                      const FrankConstants& fc, const PenaltyConfig& pc) {
  if (pc.zeta < 0.0) throw std::invalid_argument("penalty weight must be nonnegative");
  if (sp.family != Family::Q2Vector3 || n.size() != sp.dof_count())
    throw std::invalid_argument("director field does not match space");
  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, sp.mesh.hx(), sp.mesh.hy());
  const double kappa = fc.kappa();
  const double k23 = fc.K2 - fc.K3;

  const auto adj = detail::node_adjacency(sp);
  detail::PatternAccumulator acc(adj, sp.mesh.node_count(), 3);
  const auto fixed = detail::fixed_mask(sp, 3);

  detail::LocalBasis lb;
  Eigen::Matrix<double, 27, 27> He;
  std::array<double, 27> nCk, cnk, nvk;
  std::array<Eigen::Vector3d, 27> ZC;
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int cell, int q, double w) {
    if (q == 0) He.setZero();
    detail::fill_local_basis(basis, q, 3, lb);
    const double divn = pt.div();
    const Eigen::Vector3d cn = pt.curl();
    const double ncn = pt.n.dot(cn);
    const double dev = pt.n.squaredNorm() - 1.0;
    for (int k = 0; k < 27; ++k) {
      const int comp = k % 3;
      nCk[k] = pt.n.dot(lb.C[k]);
      cnk[k] = lb.N[k] * cn[comp];
      nvk[k] = lb.N[k] * pt.n[comp];
      ZC[k] = lb.C[k] - (1.0 - kappa) * nCk[k] * pt.n;
    }
    for (int i = 0; i < 27; ++i) {
      const int ci = i % 3;
      for (int j = i; j < 27; ++j) {
        const int cj = j % 3;
        double h = 2.0 * fc.K1 * lb.D[i] * lb.D[j] + 2.0 * fc.K3 * lb.C[i].dot(ZC[j]);
        h += 2.0 * k23 *
             (ncn * (lb.N[j] * lb.C[i][cj] + lb.N[i] * lb.C[j][ci]) +
              nCk[i] * cnk[j] + nCk[j] * cnk[i] + cnk[i] * cnk[j]);
        if (ci == cj) h += 4.0 * pc.zeta * dev * lb.N[i] * lb.N[j];
        h += 8.0 * pc.zeta * nvk[i] * nvk[j];
        He(i, j) += w * h;
      }
    }
    if (q == rule.points() - 1) {
      const auto nodes = sp.cell_nodes(cell);
      std::array<int, 27> gdof;
      for (int l = 0; l < 9; ++l)
        for (int c = 0; c < 3; ++c) gdof[3 * l + c] = sp.dof(nodes[l], c);
      for (int i = 0; i < 27; ++i) {
        if (fixed[gdof[i]]) continue;
        for (int j = 0; j < 27; ++j) {
          if (fixed[gdof[j]]) continue;
          const double v = j >= i ? He(i, j) : He(j, i);
          acc.add(gdof[i], gdof[j], v);
        }
      }
    }
  });
  std::vector<int> fixed_dofs;
  for (int d = 0; d < sp.dof_count(); ++d)
    if (fixed[d]) fixed_dofs.push_back(d);
  acc.set_unit_diagonal(fixed_dofs);
  return acc.take();
}

// Newton system for the Lagrangian formulation at (n_k, lambda_k):
//   [ A   B ] [dn     ]   [ -(F_n[v] + 2(lambda n, v)) ]
//   [ B^T 0 ] [dlambda] = [ -(n.n - 1, gamma)          ]
// with A the elastic Hessian plus the multiplier mass term 2(lambda dn, v)
// and B[v, gamma] = 2(gamma, n . v) pairing Q2-vector against P0.
inline BlockSystem assemble_lagrangian_system(const FESpace& sp, const Vec& n,
                                              const Vec& lambda,
                                              const FrankConstants& fc) {
  if (sp.family != Family::Q2Vector3 || n.size() != sp.dof_count())
    throw std::invalid_argument("director field does not match space");
  if (lambda.size() != sp.mesh.cell_count())
    throw std::invalid_argument("multiplier field does not match mesh");
  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, sp.mesh.hx(), sp.mesh.hy());
  const double kappa = fc.kappa();
  const double k23 = fc.K2 - fc.K3;

  BlockSystem sys;
  sys.ncomp = 3;
  sys.nodes = sp.mesh.node_count();
  sys.cells = sp.mesh.cell_count();
  sys.fixed = detail::fixed_mask(sp, 3);
  sys.f = Vec::Zero(sys.udofs());
  sys.g = Vec::Zero(sys.cells);

  const auto adj = detail::node_adjacency(sp);
  detail::PatternAccumulator acc(adj, sys.nodes, 3);
  std::vector<Triplet> btrips;
  btrips.reserve(static_cast<size_t>(sys.cells) * 27);

  detail::LocalBasis lb;
  Eigen::Matrix<double, 27, 27> He;
  Eigen::Matrix<double, 27, 1> ge, be;
  std::array<double, 27> nCk, cnk, nvk;
  std::array<Eigen::Vector3d, 27> ZC;
  double gc = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(sp, n, pt, [&](int cell, int q, double w) {
    if (q == 0) {
      He.setZero();
      ge.setZero();
      be.setZero();
      gc = 0.0;
    }
    detail::fill_local_basis(basis, q, 3, lb);
    const double lam = lambda[cell];
    const double divn = pt.div();
    const Eigen::Vector3d cn = pt.curl();
    const double ncn = pt.n.dot(cn);
    const double dev = pt.n.squaredNorm() - 1.0;
    const Eigen::Vector3d zcn = cn - (1.0 - kappa) * ncn * pt.n;
    for (int k = 0; k < 27; ++k) {
      const int comp = k % 3;
      nCk[k] = pt.n.dot(lb.C[k]);
      cnk[k] = lb.N[k] * cn[comp];
      nvk[k] = lb.N[k] * pt.n[comp];
      ZC[k] = lb.C[k] - (1.0 - kappa) * nCk[k] * pt.n;
      ge[k] += w * (2.0 * fc.K1 * divn * lb.D[k] + 2.0 * fc.K3 * zcn.dot(lb.C[k]) +
                    2.0 * k23 * ncn * cnk[k] + 2.0 * lam * nvk[k]);
      be[k] += w * 2.0 * nvk[k];
    }
    gc += w * dev;
    for (int i = 0; i < 27; ++i) {
      const int ci = i % 3;
      for (int j = i; j < 27; ++j) {
        const int cj = j % 3;
        double h = 2.0 * fc.K1 * lb.D[i] * lb.D[j] + 2.0 * fc.K3 * lb.C[i].dot(ZC[j]);
        h += 2.0 * k23 *
             (ncn * (lb.N[j] * lb.C[i][cj] + lb.N[i] * lb.C[j][ci]) +
              nCk[i] * cnk[j] + nCk[j] * cnk[i] + cnk[i] * cnk[j]);
        if (ci == cj) h += 2.0 * lam * lb.N[i] * lb.N[j];
        He(i, j) += w * h;
      }
    }
    if (q == rule.points() - 1) {
      const auto nodes = sp.cell_nodes(cell);
      std::array<int, 27> gdof;
      for (int l = 0; l < 9; ++l)
        for (int c = 0; c < 3; ++c) gdof[3 * l + c] = sp.dof(nodes[l], c);
      for (int i = 0; i < 27; ++i) {
        if (sys.fixed[gdof[i]]) continue;
        sys.f[gdof[i]] -= ge[i];
        btrips.emplace_back(gdof[i], cell, be[i]);
        for (int j = 0; j < 27; ++j) {
          if (sys.fixed[gdof[j]]) continue;
          acc.add(gdof[i], gdof[j], j >= i ? He(i, j) : He(j, i));
        }
      }
      sys.g[cell] = -gc;
    }
  });
  std::vector<int> fixed_dofs;
  for (int d = 0; d < sys.udofs(); ++d)
    if (sys.fixed[d]) fixed_dofs.push_back(d);
  acc.set_unit_diagonal(fixed_dofs);
  acc.take().swap(sys.A);
  sys.B.resize(sys.udofs(), sys.cells);
  sys.B.setFromTriplets(btrips.begin(), btrips.end());
  return sys;
}

// Newton system for the flexoelectric Lagrangian at (n_k, phi_k, lambda_k).
// The u block interleaves four unknowns per node (director then potential);
// the potential-potential block is the negated dielectric form
//   -D,  D[psi, chi] = 2 eps0 eps_perp (grad psi, grad chi)
//                    + 2 eps0 eps_a (n . grad psi)(n . grad chi),
// so D itself is positive semidefinite and the assembled arrangement matches
// [[A, B1, B2], [B1^T, -D, 0], [B2^T, 0, 0]].
inline BlockSystem assemble_flexo_system(const FESpace& nsp, const Vec& n,
                                         const FESpace& psp, const Vec& phi,
                                         const Vec& lambda, const FrankConstants& fc,
                                         const ElectricConstants& ec) {
  if (nsp.family != Family::Q2Vector3 || n.size() != nsp.dof_count())
    throw std::invalid_argument("director field does not match space");
  if (psp.family != Family::Q2Scalar || phi.size() != psp.dof_count())
    throw std::invalid_argument("potential field does not match space");
  if (psp.mesh.nx != nsp.mesh.nx || psp.mesh.ny != nsp.mesh.ny ||
      psp.mesh.periodic_x != nsp.mesh.periodic_x)
    throw std::invalid_argument("director and potential meshes differ");
  if (lambda.size() != nsp.mesh.cell_count())
    throw std::invalid_argument("multiplier field does not match mesh");

  const QuadratureRule& rule = default_rule();
  const Q2Basis basis = q2_basis(rule, nsp.mesh.hx(), nsp.mesh.hy());
  const double kappa = fc.kappa();
  const double k23 = fc.K2 - fc.K3;
  const double de = 2.0 * ec.eps0 * ec.eps_perp;
  const double da = 2.0 * ec.eps0 * ec.eps_a();

  BlockSystem sys;
  sys.ncomp = 4;
  sys.nodes = nsp.mesh.node_count();
  sys.cells = nsp.mesh.cell_count();
  sys.fixed = detail::fixed_mask(nsp, 4);
  sys.f = Vec::Zero(sys.udofs());
  sys.g = Vec::Zero(sys.cells);

  const auto adj = detail::node_adjacency(nsp);
  detail::PatternAccumulator acc(adj, sys.nodes, 4);
  std::vector<Triplet> btrips;
  btrips.reserve(static_cast<size_t>(sys.cells) * 27);

  detail::LocalBasis lb;
  Eigen::Matrix<double, 36, 36> He;
  Eigen::Matrix<double, 36, 1> ge, be;
  Eigen::Matrix<double, 9, 1> lphi;
  std::array<double, 36> nCk, cnk, nvk, vgk, ngk;   // per-dof scalars
  std::array<Eigen::Vector3d, 36> ZC, Xg;           // Z curl, (e_c N) x curl-style
  double gc = 0.0;
  DirectorPoint pt;
  detail::for_each_director_point(nsp, n, pt, [&](int cell, int q, double w) {
    if (q == 0) {
      He.setZero();
      ge.setZero();
      be.setZero();
      gc = 0.0;
      const auto nodes = psp.cell_nodes(cell);
      for (int l = 0; l < 9; ++l) lphi[l] = phi[psp.dof(nodes[l], 0)];
    }
    detail::fill_local_basis(basis, q, 4, lb);
    const double lam = lambda[cell];
    const double divn = pt.div();
    const Eigen::Vector3d cn = pt.curl();
    const double ncn = pt.n.dot(cn);
    const double dev = pt.n.squaredNorm() - 1.0;
    const Eigen::Vector3d zcn = cn - (1.0 - kappa) * ncn * pt.n;
    const Eigen::Vector3d g(basis.dNdx.row(q) * lphi, basis.dNdy.row(q) * lphi, 0.0);
    const double ng = pt.n.dot(g);
    const Eigen::Vector3d nxc = pt.n.cross(cn);

    // per-dof tables; potential dofs (comp 3) carry their gradient in Xg
    for (int k = 0; k < 36; ++k) {
      const int comp = k % 4;
      if (comp < 3) {
        nCk[k] = pt.n.dot(lb.C[k]);
        cnk[k] = lb.N[k] * cn[comp];
        nvk[k] = lb.N[k] * pt.n[comp];
        vgk[k] = lb.N[k] * g[comp];  // v . grad phi
        ZC[k] = lb.C[k] - (1.0 - kappa) * nCk[k] * pt.n;
        // v x curl n + n x curl v for trial/test couplings
        Eigen::Vector3d ek = Eigen::Vector3d::Zero();
        ek[comp] = lb.N[k];
        Xg[k] = ek.cross(cn) + pt.n.cross(lb.C[k]);
        ngk[k] = 0.0;
      } else {
        const int l = k / 4;
        ZC[k] = {basis.dNdx(q, l), basis.dNdy(q, l), 0.0};  // grad psi stash
        ngk[k] = pt.n.dot(ZC[k]);
        nCk[k] = cnk[k] = nvk[k] = vgk[k] = 0.0;
        Xg[k].setZero();
      }
    }

    for (int k = 0; k < 36; ++k) {
      if (k % 4 < 3) {
        // director residual: elastic + multiplier + electric couplings
        double r = 2.0 * fc.K1 * divn * lb.D[k] + 2.0 * fc.K3 * zcn.dot(lb.C[k]) +
                   2.0 * k23 * ncn * cnk[k] + 2.0 * lam * nvk[k];
        r += -da * ng * vgk[k] + 2.0 * ec.e_s * (lb.D[k] * ng + divn * vgk[k]) +
             2.0 * ec.e_b * Xg[k].dot(g);
        ge[k] += w * r;
        be[k] += w * 2.0 * nvk[k];
      } else {
        // potential residual
        double r = -de * g.dot(ZC[k]) - da * ng * ngk[k] +
                   2.0 * ec.e_s * divn * ngk[k] + 2.0 * ec.e_b * nxc.dot(ZC[k]);
        ge[k] += w * r;
      }
    }
    gc += w * dev;

    for (int i = 0; i < 36; ++i) {
      const int ci = i % 4;
      for (int j = i; j < 36; ++j) {
        const int cj = j % 4;
        double h = 0.0;
        if (ci < 3 && cj < 3) {
          h = 2.0 * fc.K1 * lb.D[i] * lb.D[j] + 2.0 * fc.K3 * lb.C[i].dot(ZC[j]);
          h += 2.0 * k23 *
               (ncn * (lb.N[j] * lb.C[i][cj] + lb.N[i] * lb.C[j][ci]) +
                nCk[i] * cnk[j] + nCk[j] * cnk[i] + cnk[i] * cnk[j]);
          if (ci == cj) h += 2.0 * lam * lb.N[i] * lb.N[j];
          h += -da * vgk[i] * vgk[j] +
               2.0 * ec.e_s * (lb.D[i] * vgk[j] + lb.D[j] * vgk[i]);
          // bend coupling between two director dofs:
          //   2 e_b (v x curl d + d x curl v) . grad phi
          Eigen::Vector3d ei = Eigen::Vector3d::Zero(), ej = Eigen::Vector3d::Zero();
          ei[ci] = lb.N[i];
          ej[cj] = lb.N[j];
          h += 2.0 * ec.e_b * (ei.cross(lb.C[j]) + ej.cross(lb.C[i])).dot(g);
        } else if (ci == 3 && cj == 3) {
          // -(dielectric form)
          h = -(de * ZC[i].dot(ZC[j]) + da * ngk[i] * ngk[j]);
        } else {
          // director-potential coupling; let t be the director dof
          const int t = ci < 3 ? i : j;
          const int p = ci < 3 ? j : i;
          h = -da * (ngk[p] * vgk[t] + ng * lb.N[t] * ZC[p][t % 4]) +
              2.0 * ec.e_s * (lb.D[t] * ngk[p] + divn * lb.N[t] * ZC[p][t % 4]) +
              2.0 * ec.e_b * Xg[t].dot(ZC[p]);
        }
        He(i, j) += w * h;
      }
    }
    if (q == rule.points() - 1) {
      const auto nodes = nsp.cell_nodes(cell);
      std::array<int, 36> gdof;
      for (int l = 0; l < 9; ++l) {
        for (int c = 0; c < 3; ++c) gdof[4 * l + c] = 4 * nodes[l] + c;
        gdof[4 * l + 3] = 4 * nodes[l] + 3;
      }
      for (int i = 0; i < 36; ++i) {
        if (sys.fixed[gdof[i]]) continue;
        sys.f[gdof[i]] -= ge[i];
        if (i % 4 < 3) btrips.emplace_back(gdof[i], cell, be[i]);
        for (int j = 0; j < 36; ++j) {
          if (sys.fixed[gdof[j]]) continue;
          acc.add(gdof[i], gdof[j], j >= i ? He(i, j) : He(j, i));
        }
      }
      sys.g[cell] = -gc;
    }
  });
  std::vector<int> fixed_dofs;
  for (int d = 0; d < sys.udofs(); ++d)
    if (sys.fixed[d]) fixed_dofs.push_back(d);
  acc.set_unit_diagonal(fixed_dofs);
  acc.take().swap(sys.A);
  sys.B.resize(sys.udofs(), sys.cells);
  sys.B.setFromTriplets(btrips.begin(), btrips.end());
  return sys;
}

// Interleave (n, phi) into the four-component u layout and back.
inline Vec pack_flexo(const FESpace& nsp, const Vec& n, const Vec& phi) {
  Vec u(4 * nsp.mesh.node_count());
  for (int id = 0; id < nsp.mesh.node_count(); ++id) {
    for (int c = 0; c < 3; ++c) u[4 * id + c] = n[3 * id + c];
    u[4 * id + 3] = phi[id];
  }
  return u;
}

inline void unpack_flexo(const Vec& u, Vec& n, Vec& phi) {
  const int nodes = static_cast<int>(u.size()) / 4;
  n.resize(3 * nodes);
  phi.resize(nodes);
  for (int id = 0; id < nodes; ++id) {
    for (int c = 0; c < 3; ++c) n[3 * id + c] = u[4 * id + c];
    phi[id] = u[4 * id + 3];
  }
}

// Coordinate-format dump (one "row col value" line per stored entry).
inline void write_coordinate_format(const SpMat& m, std::ostream& os) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace nematic
