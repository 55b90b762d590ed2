// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "assembly.hpp"

namespace nematic {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sparse LU with a backward-error acceptance check; the factorization
// backend is deliberately isolated behind this one type.
class DirectFactor {
 public:
  explicit DirectFactor(const SpMat& A) : a_(&A) {
    lu_.compute(A);
    if (lu_.info() != Eigen::Success)
      throw SolverError("sparse factorization failed");
  }

  Vec solve(const Vec& b) const {
    Vec x = lu_.solve(b);
    if (lu_.info() != Eigen::Success || !x.allFinite())
      throw SolverError("sparse solve failed");
    // scaled residual ||Ax-b|| / (|A|max ||x|| + ||b||)
    double amax = 0.0;
    for (int j = 0; j < a_->outerSize(); ++j)
      for (SpMat::InnerIterator it(*a_, j); it; ++it)
        amax = std::max(amax, std::abs(it.value()));
    const double denom = amax * x.norm() + b.norm();
    if (denom > 0.0 && ((*a_) * x - b).norm() > 1e-10 * denom)
      throw SolverError("factorization residual too large (singular system?)");
    return x;
  }

 private:
  Eigen::SparseLU<SpMat> lu_;
  const SpMat* a_;
};

inline Vec direct_solve(const SpMat& A, const Vec& b) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw std::invalid_argument("direct solve needs a square system");
  return DirectFactor(A).solve(b);
}

// Monolithic saddle solve [[A,B],[B^T,0]] z = [f; g].
inline Vec direct_solve(const BlockSystem& sys) {
  const SpMat K = sys.monolithic();
  return direct_solve(K, sys.rhs());
}

}  // namespace nematic
