// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include <Eigen/Core>

#include "fe_space.hpp"

namespace nematic {

// Central-difference gradient of a scalar functional, one dof at a time.
// Verification oracle only; cost is two functional evaluations per dof.
template <class Functional>
Vec fd_gradient(Functional&& f, const Vec& x, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("fd step must be positive");
  Vec g(x.size());
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + eps;
    const double fp = f(xp);
    xp[i] = xi - eps;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

// Central-difference directional derivative (g(x), d) of a vector field g.
template <class Gradient>
Vec fd_jacobian_action(Gradient&& g, const Vec& x, const Vec& d, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("fd step must be positive");
  Vec gp = g(x + eps * d);
  Vec gm = g(x - eps * d);
  return (gp - gm) / (2.0 * eps);
}

}  // namespace nematic
