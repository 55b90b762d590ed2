// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "assembly.hpp"
#include "direct_solver.hpp"
#include "fe_space.hpp"
#include "newton.hpp"

namespace nematic {

struct MGConfig {
  double gamma_b = 1.2;
  double tolerance = 1e-6;  // relative residual
  int max_cycles = 100;
  int pre_sweeps = 1;
  int post_sweeps = 1;
  int inner_sweeps = 2;  // Jacobi sweeps on the constraint Schur system
  int coarse_n = 8;      // cells per direction on the directly solved grid
};

// Nodal block diagonal of the u-u matrix with the blocks pre-inverted;
// the scaled preconditioner gamma*R is applied through these inverses.
class CollocationBlocks {
 public:
  CollocationBlocks() = default;

  CollocationBlocks(const SpMat& A, int ncomp) : ncomp_(ncomp) {
    if (A.rows() != A.cols() || ncomp < 1 || A.rows() % ncomp != 0)
      throw std::invalid_argument("matrix is not node-blocked");
    nodes_ = static_cast<int>(A.rows()) / ncomp;
    blocks_.assign(static_cast<size_t>(nodes_) * ncomp * ncomp, 0.0);
    inverse_.assign(blocks_.size(), 0.0);
    for (int j = 0; j < A.outerSize(); ++j) {
      const int jn = j / ncomp, jc = j % ncomp;
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        if (it.row() / ncomp != jn) continue;
        blocks_[block_at(jn) + (it.row() % ncomp) + ncomp * jc] = it.value();
      }
    }
    Eigen::MatrixXd b(ncomp, ncomp);
    for (int node = 0; node < nodes_; ++node) {
      b = block(node);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
      if (!lu.isInvertible())
        throw SolverError("singular collocation block");
      Eigen::MatrixXd inv = lu.inverse();
      for (int c = 0; c < ncomp; ++c)
        for (int r = 0; r < ncomp; ++r)
          inverse_[block_at(node) + r + ncomp * c] = inv(r, c);
    }
  }

  int ncomp() const { return ncomp_; }
  int nodes() const { return nodes_; }

  Eigen::MatrixXd block(int node) const {
    return Eigen::Map<const Eigen::MatrixXd>(blocks_.data() + block_at(node),
                                             ncomp_, ncomp_);
  }

  // (gamma R)^{-1} r
  Vec apply_inverse(const Vec& r, double gamma) const {
    Vec out(r.size());
    for (int node = 0; node < nodes_; ++node) {
      Eigen::Map<const Eigen::MatrixXd> inv(inverse_.data() + block_at(node),
                                            ncomp_, ncomp_);
      out.segment(ncomp_ * node, ncomp_) =
          inv * r.segment(ncomp_ * node, ncomp_) / gamma;
    }
    return out;
  }

  // R^{-1} B with the block inverses applied to the rows of B
  SpMat apply_inverse_left(const SpMat& B) const {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(B.nonZeros()) * 2);
    Eigen::VectorXd seg(ncomp_), mapped(ncomp_);
    for (int j = 0; j < B.outerSize(); ++j) {
      SpMat::InnerIterator it(B, j);
      while (it) {
        const int node = it.row() / ncomp_;
        seg.setZero();
        while (it && it.row() / ncomp_ == node) {
          seg[it.row() % ncomp_] = it.value();
          ++it;
        }
        Eigen::Map<const Eigen::MatrixXd> inv(inverse_.data() + block_at(node),
                                              ncomp_, ncomp_);
        mapped = inv * seg;
        for (int c = 0; c < ncomp_; ++c)
          if (mapped[c] != 0.0) trips.emplace_back(ncomp_ * node + c, j, mapped[c]);
      }
    }
    SpMat out(B.rows(), B.cols());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  }

 private:
  size_t block_at(int node) const {
    return static_cast<size_t>(node) * ncomp_ * ncomp_;
  }

  int ncomp_ = 0;
  int nodes_ = 0;
  std::vector<double> blocks_;
  std::vector<double> inverse_;
};

inline CollocationBlocks build_collocation_preconditioner(const SpMat& A,
                                                          int ncomp) {
  return CollocationBlocks(A, ncomp);
}

// One coupled relaxation sweep
//   x' = x + [[gamma R, B], [B^T, 0]]^{-1} (rhs - K x)
// realized through the constraint Schur system
//   B^T (gamma R)^{-1} B dl = B^T (gamma R)^{-1} r_u - r_l,
// handed to `inner`, then back-substitution for the u update.  With no
// multiplier block the update reduces to the preconditioned u correction.
template <class Inner>
Vec braess_sarazin_relax(const SpMat& A, const SpMat& B, const Vec& x,
                         const Vec& rhs, double gamma_b,
                         const CollocationBlocks& R, Inner&& inner) {
  const int u = static_cast<int>(A.rows());
  const int l = static_cast<int>(B.cols());
  if (x.size() != u + l || rhs.size() != u + l)
    throw std::invalid_argument("vector does not match the block sizes");

  Vec ru = rhs.head(u) - A * x.head(u);
  Vec out = x;
  if (l > 0) {
    ru -= B * x.tail(l);
    const Vec rl = rhs.tail(l) - B.transpose() * x.head(u);
    const Vec srhs = B.transpose() * R.apply_inverse(ru, gamma_b) - rl;
    const Vec dl = inner(srhs);
    out.head(u) += R.apply_inverse(Vec(ru - B * dl), gamma_b);
    out.tail(l) += dl;
  } else {
    out.head(u) += R.apply_inverse(ru, gamma_b);
  }
  return out;
}

namespace detail {

// Node-pair sparsity of an ncomp-interleaved matrix whose blocks are
// structurally full (the assembly allocates them that way).
inline NodeAdjacency block_pattern(const SpMat& A, int ncomp) {
  NodeAdjacency adj;
  const int nodes = static_cast<int>(A.cols()) / ncomp;
  adj.ptr.assign(nodes + 1, 0);
  for (int jn = 0; jn < nodes; ++jn) {
    int count = 0;
    for (SpMat::InnerIterator it(A, ncomp * jn); it; ++it)
      if (it.row() % ncomp == 0) ++count;
    adj.ptr[jn + 1] = adj.ptr[jn] + count;
  }
  adj.idx.resize(adj.ptr.back());
  for (int jn = 0; jn < nodes; ++jn) {
    int pos = adj.ptr[jn];
    for (SpMat::InnerIterator it(A, ncomp * jn); it; ++it)
      if (it.row() % ncomp == 0) adj.idx[pos++] = it.row() / ncomp;
  }
  return adj;
}

// Scalar block (a, b) of an interleaved matrix, on the shared node pattern.
inline SpMat extract_component_block(const SpMat& A, const NodeAdjacency& pat,
                                     int ncomp, int a, int b) {
  const int nodes = static_cast<int>(A.cols()) / ncomp;
  SpMat m(nodes, nodes);
  m.makeCompressed();
  m.resizeNonZeros(pat.idx.size());
  auto* outer = m.outerIndexPtr();
  auto* inner = m.innerIndexPtr();
  auto* vals = m.valuePtr();
  for (int jn = 0; jn <= nodes; ++jn) outer[jn] = pat.ptr[jn];
  std::copy(pat.idx.begin(), pat.idx.end(), inner);
  std::fill(vals, vals + pat.idx.size(), 0.0);
  for (int jn = 0; jn < nodes; ++jn) {
    int pos = pat.ptr[jn];
    for (SpMat::InnerIterator it(A, ncomp * jn + b); it; ++it) {
      if (it.row() % ncomp != a) continue;
      // entries arrive in ascending node order, matching the pattern
      while (pat.idx[pos] != it.row() / ncomp) ++pos;
      vals[pos] = it.value();
    }
  }
  return m;
}

// Interleave a node-level transfer over ncomp components without a triplet
// detour (the expanded matrix can be large on fine grids).
inline SpMat expand_by_components(const SpMat& Pn, int ncomp) {
  SpMat out(Pn.rows() * ncomp, Pn.cols() * ncomp);
  out.makeCompressed();
  out.resizeNonZeros(Pn.nonZeros() * ncomp);
  auto* outer = out.outerIndexPtr();
  auto* inner = out.innerIndexPtr();
  auto* vals = out.valuePtr();
  long pos = 0;
  for (int jc = 0; jc < Pn.outerSize(); ++jc) {
    for (int c = 0; c < ncomp; ++c) {
      outer[ncomp * jc + c] = static_cast<int>(pos);
      for (SpMat::InnerIterator it(Pn, jc); it; ++it) {
        inner[pos] = ncomp * it.row() + c;
        vals[pos++] = it.value();
      }
    }
  }
  outer[out.cols()] = static_cast<int>(pos);
  return out;
}

// Transfer with Dirichlet coupling removed: rows at fixed fine nodes and
// columns at fixed coarse nodes are dropped, so coarse corrections vanish
// on the walls.
inline SpMat mask_wall_nodes(const SpMat& Pn, const Mesh& fine,
                             const Mesh& coarse) {
  std::vector<Triplet> trips;
  trips.reserve(Pn.nonZeros());
  for (int j = 0; j < Pn.outerSize(); ++j) {
    if (coarse.node_on_wall(j)) continue;
    for (SpMat::InnerIterator it(Pn, j); it; ++it)
      if (!fine.node_on_wall(it.row()))
        trips.emplace_back(it.row(), it.col(), it.value());
  }
  SpMat out(Pn.rows(), Pn.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace detail

struct MGLevel {
  SpMat A_store, B_store;          // owned on coarser levels
  const SpMat* A_ref = nullptr;    // finest level borrows the caller's system
  const SpMat* B_ref = nullptr;
  CollocationBlocks R;
  SpMat T;      // B^T R^{-1} B; the Schur operator is T / gamma_b
  Vec tdiag;
  SpMat Pn;     // node-level transfer from the next coarser level
  SpMat Pu;     // ncomp-expanded transfer
  SpMat Pl;     // multiplier transfer (cell injection)
  int usize = 0;
  int lsize = 0;

  const SpMat& a() const { return A_ref ? *A_ref : A_store; }
  const SpMat& b() const { return B_ref ? *B_ref : B_store; }
  int size() const { return usize + lsize; }
};

// Geometric hierarchy with Galerkin-coarsened operators.  Keeps pointers
// into the finest system, which must outlive the hierarchy.
struct MGHierarchy {
  std::vector<MGLevel> levels;  // coarsest first
  std::shared_ptr<SpMat> coarse_matrix;
  std::shared_ptr<DirectFactor> coarse_factor;

  const MGLevel& finest() const { return levels.back(); }
};

namespace detail {

inline void finish_level(MGLevel& lvl, int ncomp) {
  lvl.R = CollocationBlocks(lvl.a(), ncomp);
  if (lvl.lsize > 0) {
    lvl.T = lvl.b().transpose() * lvl.R.apply_inverse_left(lvl.b());
    lvl.tdiag = lvl.T.diagonal();
    for (int c = 0; c < lvl.tdiag.size(); ++c)
      if (std::abs(lvl.tdiag[c]) < 1e-300)
        throw SolverError("constraint Schur diagonal vanishes");
  }
}

// Galerkin triple product done scalar block by scalar block to bound the
// transient memory on fine grids.
inline SpMat galerkin_coarsen(const SpMat& Af, const SpMat& Pn, int ncomp,
                              const Mesh& coarse) {
  const NodeAdjacency fine_pat = block_pattern(Af, ncomp);
  const int cnodes = static_cast<int>(Pn.cols());

  // the coarse node pattern comes from the first block product
  SpMat m00 = detail::extract_component_block(Af, fine_pat, ncomp, 0, 0);
  SpMat coarse00 = Pn.transpose() * (m00 * Pn).eval();
  coarse00.makeCompressed();
  m00.resize(0, 0);

  // wall columns come out structurally empty, so force every diagonal into
  // the pattern; the unit pinning below needs the slot to exist
  NodeAdjacency cpat;
  cpat.ptr.assign(cnodes + 1, 0);
  cpat.idx.reserve(coarse00.nonZeros() + cnodes);
  for (int j = 0; j < cnodes; ++j) {
    bool placed = false;
    for (int p = coarse00.outerIndexPtr()[j]; p < coarse00.outerIndexPtr()[j + 1];
         ++p) {
      const int r = coarse00.innerIndexPtr()[p];
      if (!placed && r >= j) {
        if (r != j) cpat.idx.push_back(j);
        placed = true;
      }
      cpat.idx.push_back(r);
    }
    if (!placed) cpat.idx.push_back(j);
    cpat.ptr[j + 1] = static_cast<int>(cpat.idx.size());
  }

  PatternAccumulator acc(cpat, cnodes, ncomp);
  for (int a = 0; a < ncomp; ++a)
    for (int b = 0; b < ncomp; ++b) {
      SpMat mc;
      if (a == 0 && b == 0) {
        mc.swap(coarse00);
      } else {
        SpMat mab = detail::extract_component_block(Af, fine_pat, ncomp, a, b);
        mc = Pn.transpose() * (mab * Pn).eval();
      }
      for (int j = 0; j < mc.outerSize(); ++j)
        for (SpMat::InnerIterator it(mc, j); it; ++it)
          acc.add(ncomp * it.row() + a, ncomp * j + b, it.value());
    }

  // pin the eliminated wall dofs the same way the assembly does
  std::vector<int> fixed;
  for (int id = 0; id < coarse.node_count(); ++id)
    if (coarse.node_on_wall(id))
      for (int c = 0; c < ncomp; ++c) fixed.push_back(ncomp * id + c);
  acc.set_unit_diagonal(fixed);
  return acc.take();
}

}  // namespace detail

inline MGHierarchy build_hierarchy(const SpMat& Afine, const SpMat& Bfine,
                                   const Mesh& finest, int ncomp,
                                   int coarse_n) {
  if (finest.nx != finest.ny)
    throw std::invalid_argument("hierarchy expects square grids");
  std::vector<int> sizes{finest.nx};
  while (sizes.back() > coarse_n) {
    if (sizes.back() % 2 != 0)
      throw std::invalid_argument("grid does not coarsen to the requested base");
    sizes.push_back(sizes.back() / 2);
  }
  if (sizes.back() != coarse_n)
    throw std::invalid_argument("grid does not coarsen to the requested base");
  std::reverse(sizes.begin(), sizes.end());

  const bool has_lambda = Bfine.cols() > 0;
  MGHierarchy h;
  h.levels.resize(sizes.size());

  MGLevel& top = h.levels.back();
  top.A_ref = &Afine;
  top.B_ref = &Bfine;
  top.usize = static_cast<int>(Afine.rows());
  top.lsize = static_cast<int>(Bfine.cols());

  for (int k = static_cast<int>(sizes.size()) - 1; k > 0; --k) {
    const Mesh fine_mesh = build_mesh(sizes[k], sizes[k], finest.periodic_x);
    const Mesh coarse_mesh =
        build_mesh(sizes[k - 1], sizes[k - 1], finest.periodic_x);
    MGLevel& lvl = h.levels[k];
    MGLevel& down = h.levels[k - 1];

    const FESpace fs = make_space(fine_mesh, Family::Q2Scalar);
    const FESpace cs = make_space(coarse_mesh, Family::Q2Scalar);
    detail::mask_wall_nodes(prolongation_matrix(cs, fs), fine_mesh, coarse_mesh)
        .swap(lvl.Pn);
    detail::expand_by_components(lvl.Pn, ncomp).swap(lvl.Pu);

    detail::galerkin_coarsen(lvl.a(), lvl.Pn, ncomp, coarse_mesh)
        .swap(down.A_store);
    down.usize = static_cast<int>(down.A_store.rows());
    if (has_lambda) {
      const FESpace fl = make_space(fine_mesh, Family::P0);
      const FESpace cl = make_space(coarse_mesh, Family::P0);
      prolongation_matrix(cl, fl).swap(lvl.Pl);
      down.B_store = lvl.Pu.transpose() * (lvl.b() * lvl.Pl).eval();
      down.lsize = static_cast<int>(down.B_store.cols());
    } else {
      down.B_store = SpMat(down.usize, 0);
      down.lsize = 0;
    }
    detail::finish_level(lvl, ncomp);
  }
  detail::finish_level(h.levels.front(), ncomp);

  // direct solve on the base grid
  const MGLevel& base = h.levels.front();
  std::vector<Triplet> trips;
  trips.reserve(base.a().nonZeros() + 2 * base.b().nonZeros());
  for (int j = 0; j < base.a().outerSize(); ++j)
    for (SpMat::InnerIterator it(base.a(), j); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < base.b().outerSize(); ++j)
    for (SpMat::InnerIterator it(base.b(), j); it; ++it) {
      trips.emplace_back(it.row(), base.usize + it.col(), it.value());
      trips.emplace_back(base.usize + it.col(), it.row(), it.value());
    }
  h.coarse_matrix = std::make_shared<SpMat>(base.size(), base.size());
  h.coarse_matrix->setFromTriplets(trips.begin(), trips.end());
  h.coarse_factor = std::make_shared<DirectFactor>(*h.coarse_matrix);
  return h;
}

struct MGResult {
  Vec x;
  int cycles = 0;
  bool converged = false;
  double relative_residual = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline Vec mg_residual(const MGLevel& lvl, const Vec& x, const Vec& rhs) {
  Vec r = rhs;
  r.head(lvl.usize) -= lvl.a() * x.head(lvl.usize);
  if (lvl.lsize > 0) {
    r.head(lvl.usize) -= lvl.b() * x.tail(lvl.lsize);
    r.tail(lvl.lsize) -= lvl.b().transpose() * x.head(lvl.usize);
  }
  return r;
}

inline Vec inner_jacobi(const MGLevel& lvl, const MGConfig& cfg,
                        const Vec& srhs) {
  // fixed diagonally preconditioned sweeps on (T / gamma) y = srhs
  Vec y = Vec::Zero(srhs.size());
  for (int s = 0; s < cfg.inner_sweeps; ++s) {
    const Vec r = srhs - (lvl.T * y) / cfg.gamma_b;
    y += cfg.gamma_b * (r.array() / lvl.tdiag.array()).matrix();
  }
  return y;
}

inline void vcycle(const MGHierarchy& h, const MGConfig& cfg, int k, Vec& x,
                   const Vec& rhs) {
  if (k == 0) {
    x = h.coarse_factor->solve(rhs);
    return;
  }
  const MGLevel& lvl = h.levels[k];
  auto inner = [&](const Vec& srhs) { return inner_jacobi(lvl, cfg, srhs); };
  for (int s = 0; s < cfg.pre_sweeps; ++s)
    x = braess_sarazin_relax(lvl.a(), lvl.b(), x, rhs, cfg.gamma_b, lvl.R, inner);

  const MGLevel& down = h.levels[k - 1];
  const Vec r = mg_residual(lvl, x, rhs);
  Vec rc(down.size());
  rc.head(down.usize) = lvl.Pu.transpose() * r.head(lvl.usize);
  if (down.lsize > 0)
    rc.tail(down.lsize) = lvl.Pl.transpose() * r.tail(lvl.lsize);

  Vec xc = Vec::Zero(down.size());
  vcycle(h, cfg, k - 1, xc, rc);
  x.head(lvl.usize) += lvl.Pu * xc.head(down.usize);
  if (lvl.lsize > 0) x.tail(lvl.lsize) += lvl.Pl * xc.tail(down.lsize);

  for (int s = 0; s < cfg.post_sweeps; ++s)
    x = braess_sarazin_relax(lvl.a(), lvl.b(), x, rhs, cfg.gamma_b, lvl.R, inner);
}

}  // namespace detail

// V-cycles to a relative residual; a cycle-budget overrun is reported, not
// thrown, so callers can decide.
inline MGResult mg_solve(const MGHierarchy& h, const Vec& rhs,
                         const MGConfig& cfg) {
  const int top = static_cast<int>(h.levels.size()) - 1;
  const MGLevel& lvl = h.levels[top];
  if (rhs.size() != lvl.size())
    throw std::invalid_argument("rhs does not match the finest level");

  MGResult res;
  res.x = Vec::Zero(lvl.size());
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    res.relative_residual = 0.0;
    return res;
  }
  for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    detail::vcycle(h, cfg, top, res.x, rhs);
    res.cycles = cycle;
    res.relative_residual = detail::mg_residual(lvl, res.x, rhs).norm() / bnorm;
    if (!std::isfinite(res.relative_residual)) break;
    if (res.relative_residual < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// Newton-layer adapter: rebuilds the hierarchy for each linearization.
class MGBackend final : public LinearBackend {
 public:
  explicit MGBackend(MGConfig cfg) : cfg_(cfg) {}

  Vec solve_saddle(const BlockSystem& sys, const LinearContext& ctx) override {
    Vec x;
    {
      const MGHierarchy h = build_hierarchy(sys.A, sys.B, ctx.nspace->mesh,
                                            sys.ncomp, cfg_.coarse_n);
      x = run(h, sys.rhs());
    }
    trim();
    return x;
  }

  Vec solve_definite(const SpMat& A, const Vec& rhs,
                     const LinearContext& ctx) override {
    Vec x;
    {
      const SpMat empty(A.rows(), 0);
      const MGHierarchy h =
          build_hierarchy(A, empty, ctx.nspace->mesh, 3, cfg_.coarse_n);
      x = run(h, rhs);
    }
    trim();
    return x;
  }

  int cycles_used() const override { return last_cycles_; }
  long long total_cycles() const { return total_cycles_; }
  int solve_count() const { return solves_; }

 private:
  Vec run(const MGHierarchy& h, const Vec& rhs) {
    MGResult r = mg_solve(h, rhs, cfg_);
    last_cycles_ = r.cycles;
    total_cycles_ += r.cycles;
    ++solves_;
    if (!r.converged)
      throw SolverError("multigrid stalled at relative residual " +
                        std::to_string(r.relative_residual));
    return std::move(r.x);
  }

  // One hierarchy is built and torn down per solve; without a trim the
  // freed mid-size blocks pile up in the arena over long Newton runs.
  static void trim() {
#if defined(__GLIBC__)
    malloc_trim(0);
#endif
  }

  MGConfig cfg_;
  int last_cycles_ = 0;
  long long total_cycles_ = 0;
  int solves_ = 0;
};

}  // namespace nematic
