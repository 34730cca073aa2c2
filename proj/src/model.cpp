#include "sbl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sbl/error.hpp"

namespace sbl {

void SblProblem::validate(double column_norm_tol) const {
  if (phi.rows() < 1 || phi.cols() < 1) throw DimensionError("sensing matrix must be at least 1x1");
  if (y.cols() < 1) throw DimensionError("need at least one snapshot");
  if (y.rows() != phi.rows()) {
    throw DimensionError("measurement rows (" + std::to_string(y.rows()) + ") != sensing rows (" +
                         std::to_string(phi.rows()) + ")");
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2 must be positive and finite");
  if (!phi.allFinite() || !y.allFinite()) throw NumericError("problem data contains NaN/Inf");
  if (column_norm_tol >= 0.0) {
    for (Eigen::Index i = 0; i < phi.cols(); ++i) {
      if (std::abs(phi.col(i).norm() - 1.0) > column_norm_tol) {
        throw ConfigError("column " + std::to_string(i) + " of the sensing matrix is not unit norm");
      }
    }
  }
}

void check_gamma(const GammaVec& g, Eigen::Index m) {
  if (g.size() != m) {
    throw DimensionError("gamma has " + std::to_string(g.size()) + " entries, problem has M=" + std::to_string(m));
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw NumericError("gamma[" + std::to_string(i) + "] is not finite");
    if (g[i] < 0.0) throw DomainError("gamma[" + std::to_string(i) + "] is negative");
  }
}

Covariance::Covariance(const SblProblem& problem, const GammaVec& gamma) {
  check_gamma(gamma, problem.m());
  if (problem.y.rows() != problem.n()) throw DimensionError("measurement rows do not match sensing rows");
  const Eigen::Index n = problem.n();
  const CMatrix b = problem.phi * gamma.cwiseSqrt().asDiagonal();
  CMatrix lower = CMatrix::Zero(n, n);
  lower.selfadjointView<Eigen::Lower>().rankUpdate(b);
  // Built from the lower triangle, so the stored matrix is exactly Hermitian.
  sigma_ = lower.selfadjointView<Eigen::Lower>();
  for (Eigen::Index c = 0; c < n; ++c) sigma_(c, c) = cplx(sigma_(c, c).real() + problem.sigma2, 0.0);
  llt_.compute(sigma_);
  if (llt_.info() != Eigen::Success) throw NumericError("covariance factorization failed");
}

double Covariance::log_det() const {
  const auto& l = llt_.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i).real());
  return 2.0 * acc;
}

CMatrix Covariance::whiten(const CMatrix& rhs) const {
  return llt_.matrixL().solve(rhs);
}

Covariance covariance(const SblProblem& problem, const GammaVec& gamma) {
  return Covariance(problem, gamma);
}

namespace {

// T2 is a sum of squared moduli here, so it cannot go negative; the floor
// keeps the ratio rules finite when a column is numerically annihilated.
constexpr double kT2Floor = 1e-300;

struct Whitened {
  double log_det;
  CMatrix a;  // L^{-1} Phi
  CMatrix b;  // L^{-1} Y
};

Whitened whiten_all(const SblProblem& problem, const GammaVec& gamma) {
  Covariance cov(problem, gamma);
  const Eigen::Index m = problem.m();
  CMatrix rhs(problem.n(), m + problem.l());
  rhs << problem.phi, problem.y;
  CMatrix z = cov.whiten(rhs);
  return {cov.log_det(), z.leftCols(m), z.rightCols(problem.l())};
}

TStats stats_from(const Whitened& w, Eigen::Index snapshots) {
  TStats t;
  t.t2 = w.a.colwise().squaredNorm().transpose();
  const CMatrix c = w.a.adjoint() * w.b;  // Phi^H Sigma^{-1} Y
  t.t1 = c.rowwise().squaredNorm() / static_cast<double>(snapshots);
  for (Eigen::Index i = 0; i < t.t2.size(); ++i) {
    if (!std::isfinite(t.t1[i]) || !std::isfinite(t.t2[i])) throw NumericError("T statistics are not finite");
    t.t2[i] = std::max(t.t2[i], kT2Floor);
  }
  return t;
}

}  // namespace

double nll(const SblProblem& problem, const GammaVec& gamma) {
  Covariance cov(problem, gamma);
  const CMatrix b = cov.whiten(problem.y);
  return cov.log_det() + b.squaredNorm() / static_cast<double>(problem.l());
}

TStats t_stats(const SblProblem& problem, const GammaVec& gamma) {
  return stats_from(whiten_all(problem, gamma), problem.l());
}

Evaluation evaluate(const SblProblem& problem, const GammaVec& gamma, CMatrix* mean) {
  const Whitened w = whiten_all(problem, gamma);
  Evaluation e;
  e.nll = w.log_det + w.b.squaredNorm() / static_cast<double>(problem.l());
  e.t = stats_from(w, problem.l());
  if (mean) *mean = gamma.asDiagonal() * (w.a.adjoint() * w.b);
  if (!std::isfinite(e.nll)) throw NumericError("objective is not finite");
  return e;
}

CMatrix posterior_mean(const SblProblem& problem, const GammaVec& gamma) {
  const Whitened w = whiten_all(problem, gamma);
  return gamma.asDiagonal() * (w.a.adjoint() * w.b);
}

Posterior posterior(const SblProblem& problem, const GammaVec& gamma) {
  const Whitened w = whiten_all(problem, gamma);
  const TStats t = stats_from(w, problem.l());
  Posterior p;
  p.mean = gamma.asDiagonal() * (w.a.adjoint() * w.b);
  p.err_diag.resize(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    p.err_diag[i] = std::clamp(g - g * g * t.t2[i], 0.0, g);
  }
  return p;
}

std::pair<RVector, RVector> mpdr_diagnostics(const SblProblem& problem, const GammaVec& gamma) {
  const TStats t = t_stats(problem, gamma);
  RVector data = t.t1.array() / t.t2.array().square();
  RVector model = t.t2.array().inverse();
  return {std::move(data), std::move(model)};
}

CMatrix gram_inverse(const SblProblem& problem, const GammaVec& gamma) {
  Covariance cov(problem, gamma);
  const CMatrix a = cov.whiten(problem.phi);
  return a.adjoint() * a;
}

}  // namespace sbl
