// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace nematic {

// Tensor-product Gauss-Legendre rule on the reference cell [0,1]^2.
struct QuadratureRule {
  Eigen::ArrayXd x, y, w;  // w includes both directional weights
  int points() const { return static_cast<int>(w.size()); }
};

namespace detail {

// 1D Gauss-Legendre nodes/weights on [0,1].  n points integrate polynomials
// of degree 2n-1 exactly.
inline void gauss1d(int n, Eigen::ArrayXd& x, Eigen::ArrayXd& w) {
  x.resize(n);
  w.resize(n);
  switch (n) {
    case 1:
      x << 0.5;
      w << 1.0;
      break;
    case 2: {
      const double d = 0.5 / std::sqrt(3.0);
      x << 0.5 - d, 0.5 + d;
      w << 0.5, 0.5;
      break;
    }
    case 3: {
      const double d = 0.5 * std::sqrt(0.6);
      x << 0.5 - d, 0.5, 0.5 + d;
      w << 5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0;
      break;
    }
    case 4: {
      const double a = 0.5 * std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
      const double b = 0.5 * std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
      const double wa = 0.25 + std::sqrt(30.0) / 72.0;
      const double wb = 0.25 - std::sqrt(30.0) / 72.0;
      x << 0.5 - b, 0.5 - a, 0.5 + a, 0.5 + b;
      w << wb, wa, wa, wb;
      break;
    }
    case 5: {
      const double a = 0.5 / 3.0 * std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0));
      const double b = 0.5 / 3.0 * std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0));
      const double wa = 0.5 * (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
      const double wb = 0.5 * (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      x << 0.5 - b, 0.5 - a, 0.5, 0.5 + a, 0.5 + b;
      w << wb, wa, 0.5 * 128.0 / 225.0, wa, wb;
      break;
    }
    default:
      throw std::invalid_argument("gauss rule supports 1..5 points per direction");
  }
}

}  // namespace detail

inline QuadratureRule gauss_rule(int points_per_dim) {
  Eigen::ArrayXd x1, w1;
  detail::gauss1d(points_per_dim, x1, w1);
  const int n = points_per_dim;
  QuadratureRule r;
  r.x.resize(n * n);
  r.y.resize(n * n);
  r.w.resize(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      r.x[j * n + i] = x1[i];
      r.y[j * n + i] = x1[j];
      r.w[j * n + i] = w1[i] * w1[j];
    }
  return r;
}

// Rule used for every form in this code base.  All elastic stiffness
// integrands are degree <= 4 per direction on affine cells, exact under 3
// points; the quartic unit-length terms are not, so the discrete functional
// is the quadrature one.  Using the same rule for energies, gradients, and
// Hessians keeps those three mutually consistent to machine precision, which
// the directional-derivative checks and trust-region ratios rely on.
inline const QuadratureRule& default_rule() {
  static const QuadratureRule r = gauss_rule(3);
  return r;
}

}  // namespace nematic
