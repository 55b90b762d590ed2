// SPDX-License-Identifier: Apache-2.0
// Twist benchmark at desk scale: energy target, discretization error decay,
// and the renormalized penalty variant.

#include <cmath>
#include <sstream>

#include <nematic/runner.hpp>

#include "harness.hpp"

using namespace nematic;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

RunConfig desk() {
  RunConfig cfg;
  cfg.problem = "twist";
  cfg.method = Method::Lagrangian;
  cfg.stepping = Stepping::TRSimple;
  cfg.levels = 5;
  cfg.solver = "mg";
  return cfg;
}

}  // namespace

int main() {
  const double target_energy = 0.37011;
  const double target_l2 = 3.357e-6;  // renormalized variant reference

  const RunRecord fine = execute_run(desk());
  accept::check(fine.row.converged &&
                    std::abs(fine.row.energy - target_energy) <= 5e-5,
                "constrained twist energy at 128x128 within 5e-5 of 0.37011",
                "energy " + num(fine.row.energy));
  accept::check(fine.row.time_s < 180.0,
                "full continuation ladder finishes under three minutes",
                num(fine.row.time_s) + " s");
  accept::check(fine.row.l2_error < 1e-7,
                "director error against the closed form below 1e-7",
                "l2 " + num(fine.row.l2_error));

  RunConfig half = desk();
  half.levels = 4;
  const RunRecord coarse = execute_run(half);
  const double order = std::log2(coarse.row.l2_error / fine.row.l2_error);
  accept::check(order >= 2.5 && order <= 3.5,
                "error decays at third order under refinement",
                "observed order " + num(order) + " (l2 " +
                    num(coarse.row.l2_error) + " -> " +
                    num(fine.row.l2_error) + ")");

  RunConfig ren = desk();
  ren.method = Method::PenaltyRenorm;
  ren.stepping = Stepping::TR2D;
  ren.zeta = 1e3;
  const RunRecord rn = execute_run(ren);
  const Vec& n = rn.outcome.state.n;
  double node_dev = 0.0;
  for (int i = 0; i + 2 < n.size(); i += 3)
    node_dev = std::max(node_dev,
                        std::abs(n.segment<3>(i).norm() - 1.0));
  accept::check(rn.row.converged && node_dev <= 1e-12,
                "renormalized scheme keeps nodal directors exactly unit",
                "max nodal deviation " + num(node_dev));
  accept::check(rn.row.l2_error <= 3.0 * target_l2 &&
                    rn.row.l2_error >= target_l2 / 3.0,
                "renormalized error within a factor of three of 3.357e-6",
                "l2 " + num(rn.row.l2_error));

  return accept::verdict();
}
