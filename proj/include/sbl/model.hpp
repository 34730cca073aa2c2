#pragma once

#include <utility>

#include "sbl/types.hpp"

namespace sbl {

/// Sigma_yy(gamma) = Phi diag(gamma) Phi^H + sigma2 I together with its
/// Cholesky factor. Every model quantity below is computed from one of these.
class Covariance {
 public:
  Covariance(const SblProblem& problem, const GammaVec& gamma);

  const CMatrix& matrix() const { return sigma_; }
  /// Lower-triangular factor, Sigma = L L^H.
  CMatrix lower() const { return llt_.matrixL(); }

  double log_det() const;
  /// Solves L Z = B in place of a copy of B.
  CMatrix whiten(const CMatrix& rhs) const;
  CMatrix solve(const CMatrix& rhs) const { return llt_.solve(rhs); }

 private:
  CMatrix sigma_;
  Eigen::LLT<CMatrix> llt_;
};

/// Everything one iteration of a classical rule needs, from a single
/// factorization: the objective value plus (T1, T2).
struct Evaluation {
  double nll;
  TStats t;
};

Covariance covariance(const SblProblem& problem, const GammaVec& gamma);

/// log|Sigma_yy| + (1/L) sum_l y_l^H Sigma_yy^{-1} y_l  (constants dropped).
double nll(const SblProblem& problem, const GammaVec& gamma);

TStats t_stats(const SblProblem& problem, const GammaVec& gamma);

/// When `mean` is non-null it also receives the posterior mean from the
/// same factorization.
Evaluation evaluate(const SblProblem& problem, const GammaVec& gamma, CMatrix* mean = nullptr);

Posterior posterior(const SblProblem& problem, const GammaVec& gamma);

/// Posterior mean only; cheaper than `posterior` when err_diag is unused.
CMatrix posterior_mean(const SblProblem& problem, const GammaVec& gamma);

/// MPDR beamformer output powers per dictionary column:
/// first = data power T1/T2^2, second = model power 1/T2.
std::pair<RVector, RVector> mpdr_diagnostics(const SblProblem& problem, const GammaVec& gamma);

/// Phi^H Sigma^{-1} Phi, the M x M matrix whose diagonal is T2.
CMatrix gram_inverse(const SblProblem& problem, const GammaVec& gamma);

}  // namespace sbl
