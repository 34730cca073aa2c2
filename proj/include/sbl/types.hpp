#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace sbl {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Nonnegative per-column prior variances. All update rules iterate on this.
using GammaVec = Eigen::VectorXd;

/// Index set of nonzero rows, zero-based.
using Support = std::vector<std::size_t>;

/// Fixed data of one recovery instance: Y = Phi X + noise.
struct SblProblem {
  CMatrix phi;    // N x M, unit-norm columns
  CMatrix y;      // N x L
  double sigma2;  // noise variance, > 0

  Eigen::Index n() const { return phi.rows(); }
  Eigen::Index m() const { return phi.cols(); }
  Eigen::Index l() const { return y.cols(); }

  /// Throws DimensionError/ConfigError when the invariants do not hold.
  /// `column_norm_tol` < 0 skips the unit-norm check.
  void validate(double column_norm_tol = 1e-9) const;
};

/// Throws unless `g` has `m` finite nonnegative entries.
void check_gamma(const GammaVec& g, Eigen::Index m);

/// T1(gamma) (data-dependent) and T2(gamma) (model-dependent).
struct TStats {
  RVector t1;
  RVector t2;
};

struct Posterior {
  CMatrix mean;     // M x L
  RVector err_diag; // diagonal of the posterior error covariance
};

}  // namespace sbl
