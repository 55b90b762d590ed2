// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "assembly.hpp"
#include "direct_solver.hpp"
#include "energy.hpp"
#include "model.hpp"
#include "trust_region.hpp"

namespace nematic {

enum class Method { Lagrangian, Penalty, PenaltyRenorm };
enum class Stepping { Damped, TRSimple, TR2D };
enum class SolveStatus { Converged, MaxIterations, Diverged };

inline bool is_penalty(Method m) { return m != Method::Lagrangian; }

// All discrete fields of one problem on one grid.  phi/pspace are engaged
// only for the electrically coupled model; lambda is empty for penalty runs.
struct FieldState {
  FESpace nspace;
  FESpace lspace;
  std::optional<FESpace> pspace;
  Vec n;
  Vec lambda;
  Vec phi;
};

struct NewtonOptions {
  Method method = Method::Lagrangian;
  Stepping stepping = Stepping::Damped;
  FrankConstants fc{};
  ElectricConstants ec{};
  bool with_potential = false;
  PenaltyConfig penalty{};
  double tolerance = 1e-4;
  int max_iterations = 200;
  // a continuation ladder corrects every grid at least this many times,
  // even when the interpolated start already meets the tolerance
  int min_iterations = 0;
  // level-resolved controls (see nested.hpp for the schedules)
  double omega = 0.2;
  double delta_init = 0.3;
  double w_init = 0.2;
  TRPenaltyParams tr{};
  TRLagrangianParams ltr{};
  // residual growth beyond this factor over its running minimum flags divergence
  double divergence_factor = 1e4;
  int max_step_retries = 100;
};

struct LevelReport {
  int level = 0;
  int cells_x = 0;
  int iterations = 0;  // Newton linearizations solved
  int accepted = 0;
  int rejected = 0;    // trial steps discarded by the trust-region tests
  long long nnz = 0;   // stored entries of the level's Newton matrix
  double energy = std::numeric_limits<double>::quiet_NaN();     // integral of w_F
  double objective = std::numeric_limits<double>::quiet_NaN();  // minimized functional
  double residual = std::numeric_limits<double>::quiet_NaN();   // l2 optimality residual
  DeviationStats deviation{};
  SolveStatus status = SolveStatus::Diverged;
  int mg_cycles = 0;
  double seconds = 0.0;
};

struct LinearContext {
  const FESpace* nspace = nullptr;
  const FESpace* lspace = nullptr;
  const FESpace* pspace = nullptr;
};

// Where the Newton updates come from; implementations own their tolerance
// and failure policy and throw SolverError on breakdown.
class LinearBackend {
 public:
  virtual ~LinearBackend() = default;
  virtual Vec solve_saddle(const BlockSystem& sys, const LinearContext& ctx) = 0;
  virtual Vec solve_definite(const SpMat& A, const Vec& rhs,
                             const LinearContext& ctx) = 0;
  // iteration count consumed by the most recent solve (0 for direct)
  virtual int cycles_used() const { return 0; }
};

class DirectBackend final : public LinearBackend {
 public:
  Vec solve_saddle(const BlockSystem& sys, const LinearContext&) override {
    return direct_solve(sys);
  }
  Vec solve_definite(const SpMat& A, const Vec& rhs,
                     const LinearContext&) override {
    return direct_solve(A, rhs);
  }
};

// Project every node of a director field onto the unit sphere.
inline void renormalize(const FESpace& sp, Vec& n, int stride = 3) {
  if (n.size() < stride * sp.mesh.node_count())
    throw std::invalid_argument("field does not match space");
  for (int id = 0; id < sp.mesh.node_count(); ++id) {
    auto seg = n.segment(stride * id, 3);
    const double len = seg.norm();
    if (len < 1e-14) throw std::domain_error("degenerate director node");
    seg /= len;
  }
}

namespace detail {

inline double frank_part(const FieldState& st, const NewtonOptions& opt) {
  return frank_energy(st.nspace, st.n, opt.fc);
}

inline double objective_value(const FieldState& st, const NewtonOptions& opt) {
  if (opt.with_potential)
    return flexo_energy(st.nspace, st.n, *st.pspace, st.phi, opt.fc, opt.ec);
  if (is_penalty(opt.method))
    return penalty_energy(st.nspace, st.n, opt.fc, opt.penalty);
  return 2.0 * frank_part(st, opt);
}

inline BlockSystem assemble_saddle(const FieldState& st,
                                   const NewtonOptions& opt) {
  if (opt.with_potential)
    return assemble_flexo_system(st.nspace, st.n, *st.pspace, st.phi,
                                 st.lambda, opt.fc, opt.ec);
  return assemble_lagrangian_system(st.nspace, st.n, st.lambda, opt.fc);
}

inline void apply_saddle_step(FieldState& st, const NewtonOptions& opt,
                              const Vec& z, double scale) {
  const int nodes = st.nspace.mesh.node_count();
  if (opt.with_potential) {
    for (int id = 0; id < nodes; ++id) {
      for (int c = 0; c < 3; ++c) st.n[3 * id + c] += scale * z[4 * id + c];
      st.phi[id] += scale * z[4 * id + 3];
    }
    st.lambda += scale * z.tail(st.lambda.size());
  } else {
    st.n += scale * z.head(st.n.size());
    st.lambda += scale * z.tail(st.lambda.size());
  }
}

struct ResidualTracker {
  double min_seen = std::numeric_limits<double>::infinity();
  bool diverged(double res, double factor) {
    if (!std::isfinite(res)) return true;
    if (res > factor * min_seen) return true;
    min_seen = std::min(min_seen, res);
    return false;
  }
};

}  // namespace detail

// One Newton solve on a fixed grid.  The iterate is advanced in place; the
// report records counts, the exit residual, and final energies.
inline LevelReport newton_solve(FieldState& st, const NewtonOptions& opt,
                                LinearBackend& lin) {
  if (opt.with_potential && opt.method != Method::Lagrangian)
    throw std::invalid_argument(
        "the coupled model is solved in the multiplier formulation only");
  if (opt.tolerance <= 0.0) throw std::invalid_argument("tolerance must be positive");

  LevelReport rep;
  rep.cells_x = st.nspace.mesh.nx;
  LinearContext ctx{&st.nspace, &st.lspace,
                    st.pspace ? &*st.pspace : nullptr};
  detail::ResidualTracker track;

  if (is_penalty(opt.method)) {
    const bool renorm = opt.method == Method::PenaltyRenorm;
    double prev_objective = detail::objective_value(st, opt);
    bool energy_settled = false;
    double delta = opt.delta_init;

    for (;;) {
      const SpMat U = assemble_penalty_hessian(st.nspace, st.n, opt.fc, opt.penalty);
      const Vec grad = assemble_penalty_gradient(st.nspace, st.n, opt.fc, opt.penalty);
      const double value = penalty_energy(st.nspace, st.n, opt.fc, opt.penalty);
      const double res = grad.norm();
      rep.nnz = U.nonZeros();
      rep.residual = res;

      if (!std::isfinite(value) || track.diverged(res, opt.divergence_factor)) {
        rep.status = SolveStatus::Diverged;
        break;
      }
      // the renormalized variant stops on a settled energy, the plain one
      // on the gradient norm
      if ((renorm ? energy_settled : res < opt.tolerance) &&
          rep.iterations >= opt.min_iterations) {
        rep.status = SolveStatus::Converged;
        break;
      }
      if (rep.iterations >= opt.max_iterations) {
        rep.status = SolveStatus::MaxIterations;
        break;
      }

      const Vec newton = lin.solve_definite(U, Vec(-grad), ctx);
      rep.mg_cycles += lin.cycles_used();
      ++rep.iterations;

      if (opt.stepping == Stepping::Damped) {
        st.n += opt.omega * newton;
        ++rep.accepted;
      } else {
        bool stepped = false;
        for (int tries = 0; tries < opt.max_step_retries; ++tries) {
          const Vec step = opt.stepping == Stepping::TRSimple
                               ? tr_simple_step(U, grad, newton, delta)
                               : tr_2d_step(U, grad, newton, delta);
          const double model = quadratic_model(value, grad, U, step);
          const RhoResult rr = rho_penalty(
              value, penalty_energy(st.nspace, Vec(st.n + step), opt.fc, opt.penalty),
              model);
          if (rr.degenerate) {
            // flat model: take the step when the Newton point is interior,
            // otherwise treat it as a failed trial
            if (newton.norm() <= delta * (1.0 + 1e-12)) {
              st.n += step;
              ++rep.accepted;
              stepped = true;
              break;
            }
            delta *= opt.tr.c1;
            ++rep.rejected;
            continue;
          }
          if (value - model < 0.0) {
            // model predicts an increase along its own minimizer; shrink
            delta *= opt.tr.c1;
            ++rep.rejected;
            continue;
          }
          const AcceptAdjust aa = tr_accept_adjust(rr.rho, delta, step.norm(), opt.tr);
          delta = aa.delta_next;
          if (aa.accept) {
            st.n += step;
            ++rep.accepted;
            stepped = true;
            break;
          }
          ++rep.rejected;
        }
        if (!stepped) {
          rep.status = SolveStatus::Diverged;
          break;
        }
      }

      if (renorm) renormalize(st.nspace, st.n);
      const double objective = detail::objective_value(st, opt);
      if (renorm && std::isfinite(objective) && objective != 0.0)
        energy_settled = std::abs(prev_objective / objective - 1.0) < opt.tolerance;
      prev_objective = objective;
    }
  } else {
    double w = opt.w_init;
    BlockSystem sys = detail::assemble_saddle(st, opt);

    for (;;) {
      const double res = sys.rhs().norm();
      rep.nnz = sys.A.nonZeros() + 2 * sys.B.nonZeros();
      rep.residual = res;

      if (track.diverged(res, opt.divergence_factor)) {
        rep.status = SolveStatus::Diverged;
        break;
      }
      if (res < opt.tolerance && rep.iterations >= opt.min_iterations) {
        rep.status = SolveStatus::Converged;
        break;
      }
      if (rep.iterations >= opt.max_iterations) {
        rep.status = SolveStatus::MaxIterations;
        break;
      }

      const Vec z = lin.solve_saddle(sys, ctx);
      rep.mg_cycles += lin.cycles_used();
      ++rep.iterations;
      sys = BlockSystem{};  // only res and z are still needed; two assembled
                            // systems at once is what exhausts memory

      if (opt.stepping == Stepping::Damped) {
        detail::apply_saddle_step(st, opt, z, opt.omega);
        sys = detail::assemble_saddle(st, opt);
        ++rep.accepted;
      } else {
        // scaled full steps judged by the drop of the optimality residual
        bool stepped = false;
        for (int tries = 0; tries < opt.max_step_retries; ++tries) {
          FieldState trial = st;
          detail::apply_saddle_step(trial, opt, z, w);
          BlockSystem tsys = detail::assemble_saddle(trial, opt);
          const double tres = tsys.rhs().norm();
          if (!std::isfinite(tres)) {
            if (w <= opt.ltr.w_min * (1.0 + 1e-12)) break;  // diverged
            w = std::max(opt.ltr.w_min, w - opt.ltr.w_dec);
            ++rep.rejected;
            continue;
          }
          const LagrangianAccept la = lagrangian_tr_accept(res, tres, w, opt.ltr);
          w = la.w_next;
          if (la.accept) {
            st = std::move(trial);
            sys = std::move(tsys);
            ++rep.accepted;
            stepped = true;
            break;
          }
          ++rep.rejected;
        }
        if (!stepped) {
          rep.status = SolveStatus::Diverged;
          break;
        }
      }
    }
  }

  rep.energy = detail::frank_part(st, opt);
  rep.objective = detail::objective_value(st, opt);
  rep.deviation = deviation_stats(st.nspace, st.n);
  return rep;
}

}  // namespace nematic
