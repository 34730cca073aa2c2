#pragma once

#include "sbl/model.hpp"

namespace sbl {

// All majorizers are evaluated as gaps g(gamma; anchor) - g(anchor; anchor),
// so the additive constants never appear. Points where a 1/gamma term with a
// positive coefficient hits gamma = 0 evaluate to +infinity; negative gamma
// raises DomainError.

/// EM majorizer gap, scaled to the units of `nll`:
///   sum_i log(gamma_i / anchor_i) + m_i (1/gamma_i - 1/anchor_i),
/// m_i = (1/L) sum_l |xhat_l(anchor)_i|^2 + Sigma_e(anchor)_ii, taken from
/// the posterior moments.
double g_em_gap(const SblProblem& problem, const GammaVec& gamma, const GammaVec& anchor);

/// p-SBL majorizer gap:
///   sum_i (gamma_i - anchor_i) T2_i + anchor_i^2 T1_i (1/gamma_i - 1/anchor_i).
double g_psbl_gap(const SblProblem& problem, const GammaVec& gamma, const GammaVec& anchor);

/// Gap of the majorizer whose minimizer is `convex_majorizer_update`:
///   [ (alpha1/2) G_EM + (1 - alpha1) G_pSBL ] / (alpha1/2 + 1 - alpha1).
/// Equals g_em_gap at alpha1 = 1 and g_psbl_gap at alpha1 = 0.
double combined_majorizer_gap(const SblProblem& problem, const GammaVec& gamma, const GammaVec& anchor,
                              double alpha1);

// Same quantities from statistics already computed at the anchor. `em_target`
// is the EM minimizer (T1 - T2) anchor^2 + anchor.
double em_gap_from(const GammaVec& gamma, const GammaVec& anchor, const RVector& em_target);
double psbl_gap_from(const GammaVec& gamma, const GammaVec& anchor, const TStats& t_anchor);
double combined_gap_from(const GammaVec& gamma, const GammaVec& anchor, const TStats& t_anchor, double alpha1);

struct DeltaCheck {
  double delta;   // closed form sum (T1-T2)^2 a^3 / gamma_EM * (T2 a - 1)
  double direct;  // g_psbl_gap(em_step(anchor), anchor)
  bool agree;     // |delta - direct| <= 1e-6 * max(1, |direct|)
};

/// Change of the p-SBL majorizer under one EM step, via the closed form and
/// directly. Both are <= 0 for any nonnegative anchor.
DeltaCheck em_on_psbl_delta(const SblProblem& problem, const GammaVec& anchor);

/// v^T [ G .* conj(G) ] v with G = Phi^H Sigma^{-1} Phi: the curvature of the
/// linearization gap of log|Sigma| along v. Strictly positive for v > 0.
double strict_hessian_check(const SblProblem& problem, const GammaVec& gamma, const RVector& v);

}  // namespace sbl
