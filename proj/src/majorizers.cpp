#include "sbl/majorizers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sbl/error.hpp"
#include "sbl/updates.hpp"

namespace sbl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const GammaVec& gamma, const GammaVec& anchor) {
  if (gamma.size() != anchor.size()) throw DimensionError("gamma and anchor sizes differ");
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    if (gamma[i] < 0.0 || anchor[i] < 0.0) throw DomainError("majorizer evaluated at negative gamma");
    if (std::isnan(gamma[i]) || std::isnan(anchor[i])) throw NumericError("majorizer evaluated at NaN");
  }
}

// coef * (1/g - 1/a) with the conventions for zero entries.
double reciprocal_term(double coef, double g, double a) {
  if (coef == 0.0) return 0.0;
  if (g == 0.0) return kInf;
  return coef * (1.0 / g - 1.0 / a);
}

}  // namespace

double em_gap_from(const GammaVec& gamma, const GammaVec& anchor, const RVector& em_target) {
  check_pair(gamma, anchor);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    const double a = anchor[i];
    if (a == 0.0) {
      // Pruned coordinate: the surrogate is log(gamma), which has no finite
      // value relative to an anchor at 0 unless gamma stays at 0.
      if (g > 0.0) return kInf;
      continue;
    }
    if (g == 0.0) return kInf;
    acc += std::log(g / a) + reciprocal_term(em_target[i], g, a);
  }
  return acc;
}

double psbl_gap_from(const GammaVec& gamma, const GammaVec& anchor, const TStats& t) {
  check_pair(gamma, anchor);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    const double a = anchor[i];
    acc += (g - a) * t.t2[i];
    if (a == 0.0) continue;
    const double r = reciprocal_term(a * a * t.t1[i], g, a);
    if (std::isinf(r)) return kInf;
    acc += r;
  }
  return acc;
}

double combined_gap_from(const GammaVec& gamma, const GammaVec& anchor, const TStats& t, double alpha1) {
  if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) throw ConfigError("alpha1 must lie in [0, 1]");
  const double w_em = 0.5 * alpha1;
  const double w_ps = 1.0 - alpha1;
  const double scale = w_em + w_ps;
  double acc = 0.0;
  if (w_em > 0.0) acc += w_em * em_gap_from(gamma, anchor, em_update(anchor, t));
  if (w_ps > 0.0) acc += w_ps * psbl_gap_from(gamma, anchor, t);
  return acc / scale;
}

double g_em_gap(const SblProblem& problem, const GammaVec& gamma, const GammaVec& anchor) {
  const Posterior post = posterior(problem, anchor);
  const RVector target = post.mean.rowwise().squaredNorm() / static_cast<double>(problem.l()) + post.err_diag;
  return em_gap_from(gamma, anchor, target);
}

double g_psbl_gap(const SblProblem& problem, const GammaVec& gamma, const GammaVec& anchor) {
  return psbl_gap_from(gamma, anchor, t_stats(problem, anchor));
}

double combined_majorizer_gap(const SblProblem& problem, const GammaVec& gamma, const GammaVec& anchor,
                              double alpha1) {
  if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) throw ConfigError("alpha1 must lie in [0, 1]");
  const double w_em = 0.5 * alpha1;
  const double w_ps = 1.0 - alpha1;
  double acc = 0.0;
  if (w_em > 0.0) acc += w_em * g_em_gap(problem, gamma, anchor);
  if (w_ps > 0.0) acc += w_ps * g_psbl_gap(problem, gamma, anchor);
  return acc / (w_em + w_ps);
}

DeltaCheck em_on_psbl_delta(const SblProblem& problem, const GammaVec& anchor) {
  const TStats t = t_stats(problem, anchor);
  const GammaVec em = em_update(anchor, t);
  double delta = 0.0;
  for (Eigen::Index i = 0; i < anchor.size(); ++i) {
    const double a = anchor[i];
    if (em[i] == 0.0 || a == 0.0) continue;
    const double d = t.t1[i] - t.t2[i];
    delta += d * d * a * a * a / em[i] * (t.t2[i] * a - 1.0);
  }
  const double direct = psbl_gap_from(em, anchor, t);
  const bool agree = std::abs(delta - direct) <= 1e-6 * std::max(1.0, std::abs(direct));
  return {delta, direct, agree};
}

double strict_hessian_check(const SblProblem& problem, const GammaVec& gamma, const RVector& v) {
  if (v.size() != problem.m()) throw DimensionError("test vector has wrong length");
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw ConfigError("test vector must be strictly positive");
  }
  const CMatrix g = gram_inverse(problem, gamma);
  const RMatrix h = g.cwiseAbs2();
  return v.dot(h * v);
}

}  // namespace sbl
