// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace nematic {

// Elastic constants of the director model.  kappa = K2/K3 controls the
// anisotropy tensor Z; the one-constant case K1 = K2 = K3 makes Z = I.
struct FrankConstants {
  double K1 = 1.0;
  double K2 = 1.0;
  double K3 = 1.0;
  double kappa() const { return K2 / K3; }
};

struct ElectricConstants {
  double eps0 = 1.0;
  double eps_par = 1.0;   // parallel relative permittivity
  double eps_perp = 1.0;  // perpendicular relative permittivity
  double e_s = 0.0;       // splay flexoelectric coefficient
  double e_b = 0.0;       // bend flexoelectric coefficient
  double eps_a() const { return eps_par - eps_perp; }
};

struct PenaltyConfig {
  double zeta = 1e3;
};

// Z = I - (1-kappa) n n^T.  Eigenvalues {1, 1, 1-(1-kappa)|n|^2}; for unit n
// this is kappa on the director axis and 1 transversally.
inline Eigen::Matrix3d z_tensor(const Eigen::Vector3d& n, double kappa) {
  return Eigen::Matrix3d::Identity() - (1.0 - kappa) * n * n.transpose();
}

inline Eigen::Matrix3d z_tensor(const FrankConstants& fc, const Eigen::Vector3d& n) {
  return z_tensor(n, fc.kappa());
}

}  // namespace nematic
