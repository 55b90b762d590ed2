// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <vector>

#include "newton.hpp"
#include "problems.hpp"

namespace nematic {

struct SolveConfig {
  Method method = Method::Lagrangian;
  Stepping stepping = Stepping::Damped;
  double zeta = 1e3;
  int levels = 5;
  int coarse_n = 8;
  double tolerance = 1e-4;
  int max_iterations = 200;
  double perturb = 0.0;
  double omega0 = 0.2;
  double omega_inc = 0.2;
  TRPenaltyParams tr{};
  TRLagrangianParams ltr{};
};

struct RunOutcome {
  std::vector<LevelReport> levels;
  FieldState state;
  SolveStatus status = SolveStatus::Diverged;
  double wu = 0.0;
  double seconds = 0.0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  DeviationStats deviation{};
  double l2 = std::numeric_limits<double>::quiet_NaN();
  bool converged() const { return status == SolveStatus::Converged; }
};

using BackendFactory =
    std::function<std::unique_ptr<LinearBackend>(const FieldState&)>;

// Total assemble-and-solve cost, normalized so one iteration on the last
// (finest attempted) grid costs one unit; coarser grids are weighted by
// their matrix nonzero counts.
inline double work_units(const std::vector<LevelReport>& levels) {
  if (levels.empty()) return 0.0;
  const double finest = static_cast<double>(levels.back().nnz);
  if (finest <= 0.0) return 0.0;
  double acc = 0.0;
  for (const LevelReport& r : levels)
    acc += static_cast<double>(r.nnz) * r.iterations;
  return acc / finest;
}

namespace detail {

inline NewtonOptions level_options(const ProblemSpec& prob,
                                   const SolveConfig& cfg, int level) {
  NewtonOptions opt;
  opt.method = cfg.method;
  opt.stepping = cfg.stepping;
  opt.fc = prob.fc;
  opt.ec = prob.ec;
  opt.with_potential = prob.with_potential;
  opt.penalty.zeta = cfg.zeta;
  opt.tolerance = cfg.tolerance;
  opt.max_iterations = cfg.max_iterations;
  opt.min_iterations = 1;  // every grid gets corrected, interpolant or not
  opt.tr = cfg.tr;
  opt.ltr = cfg.ltr;
  // controls loosen as the ladder climbs: interpolants start closer
  opt.omega = std::min(cfg.omega0 + cfg.omega_inc * level, 1.0);
  opt.delta_init = std::min(cfg.tr.delta_init + cfg.tr.delta_inc * level,
                            cfg.tr.delta_max);
  opt.w_init = std::min(cfg.ltr.w_init + cfg.ltr.w_lev * level, 1.0);
  return opt;
}

inline void impose_wall_traces(const FESpace& sp, const ProblemSpec& prob,
                               Vec& n) {
  for (int id = 0; id < sp.mesh.node_count(); ++id) {
    if (!sp.mesh.node_on_wall(id)) continue;
    const auto xy = sp.mesh.node_xy(id);
    const Eigen::Vector3d v =
        xy[1] == 0.0 ? prob.trace_bottom(xy[0]) : prob.trace_top(xy[0]);
    for (int c = 0; c < 3; ++c) n[3 * id + c] = v[c];
  }
}

}  // namespace detail

// Coarse-to-fine continuation: solve, interpolate, re-solve.  Stops early
// if a level fails; the partial ladder stays in the report.
inline RunOutcome nested_iteration(const ProblemSpec& prob,
                                   const SolveConfig& cfg,
                                   const BackendFactory& make_backend = {}) {
  if (cfg.levels < 1) throw std::invalid_argument("need at least one level");
  if (prob.with_potential && cfg.method != Method::Lagrangian)
    throw std::invalid_argument(
        "the coupled model is solved in the multiplier formulation only");
  const auto t0 = std::chrono::steady_clock::now();

  RunOutcome out;
  FieldState st;
  for (int level = 0; level < cfg.levels; ++level) {
    const int nx = cfg.coarse_n << level;
    const Mesh mesh = build_mesh(nx, nx, prob.periodic_x);
    FESpace nsp = make_space(mesh, Family::Q2Vector3);
    FESpace lsp = make_space(mesh, Family::P0);

    if (level == 0) {
      st.nspace = nsp;
      st.lspace = lsp;
      st.n = initial_director(nsp, prob, cfg.perturb);
      st.lambda = Vec::Zero(mesh.cell_count());
      if (prob.with_potential) {
        st.pspace = make_space(mesh, Family::Q2Scalar);
        st.phi = Vec::Zero(st.pspace->dof_count());
      }
    } else {
      st.n = interpolate(st.nspace, nsp, st.n);
      st.lambda = interpolate(st.lspace, lsp, st.lambda);
      st.nspace = nsp;
      st.lspace = lsp;
      if (prob.with_potential) {
        FESpace psp = make_space(mesh, Family::Q2Scalar);
        st.phi = interpolate(*st.pspace, psp, st.phi);
        st.pspace = psp;
      }
      // interpolation hands new wall nodes interpolated data; restore the
      // exact traces there
      detail::impose_wall_traces(st.nspace, prob, st.n);
      if (cfg.method == Method::PenaltyRenorm) renormalize(st.nspace, st.n);
    }

    std::unique_ptr<LinearBackend> backend =
        make_backend ? make_backend(st) : std::make_unique<DirectBackend>();

    const auto l0 = std::chrono::steady_clock::now();
    LevelReport rep =
        newton_solve(st, detail::level_options(prob, cfg, level), *backend);
    rep.level = level;
    rep.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - l0)
            .count();
    out.levels.push_back(rep);
    if (rep.status != SolveStatus::Converged) break;
  }

  const LevelReport& last = out.levels.back();
  out.status = last.status;
  out.wu = work_units(out.levels);
  out.energy = last.energy;
  out.objective = last.objective;
  out.deviation = last.deviation;
  out.state = std::move(st);
  if (prob.analytic && out.status == SolveStatus::Converged)
    out.l2 = l2_error(out.state.nspace, out.state.n, prob);
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

}  // namespace nematic
