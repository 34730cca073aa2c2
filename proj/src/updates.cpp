#include "sbl/updates.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sbl/dnn.hpp"
#include "sbl/majorizers.hpp"

namespace sbl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_p(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p-SBL exponent must lie in (0, 1], got " + std::to_string(p));
}

void validate_alpha(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha1 must lie in [0, 1], got " + std::to_string(a));
}

void ensure_finite(const GammaVec& g, const char* what) {
  if (!g.allFinite()) throw NumericError(std::string(what) + " produced a non-finite iterate");
}

}  // namespace

void validate_simplex(const RVector& w, double tol) {
  if (w.size() == 0) throw ConfigError("empty weight vector");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0) throw ConfigError("simplex weights must be finite and nonnegative");
  }
  if (std::abs(w.sum() - 1.0) > tol) throw ConfigError("simplex weights must sum to 1");
}

void validate_rule(const UpdateRuleSpec& rule) {
  std::visit(overloaded{
                 [](const Em&) {},
                 [](const Mu&) {},
                 [](const Psbl& r) { validate_p(r.p); },
                 [](const ConvexUpdates& r) {
                   if (r.rules.empty()) throw ConfigError("convex combination needs at least one rule");
                   if (r.schedule.empty()) throw ConfigError("convex combination needs weights");
                   for (const auto& b : r.rules) {
                     if (const auto* ps = std::get_if<Psbl>(&b)) validate_p(ps->p);
                   }
                   for (const auto& w : r.schedule) {
                     if (w.size() != static_cast<Eigen::Index>(r.rules.size())) {
                       throw ConfigError("weight vector length does not match the rule list");
                     }
                     validate_simplex(w);
                   }
                 },
                 [](const ConvexMajorizers& r) {
                   if (r.alpha1.empty()) throw ConfigError("convex majorizer rule needs alpha1");
                   for (double a : r.alpha1) validate_alpha(a);
                 },
                 [](const Dnn& r) {
                   if (!r.model) throw ConfigError("dnn rule has no model loaded");
                 },
             },
             rule);
}

void StoppingCfg::validate() const {
  if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
  if (min_iters_before_check < 0) throw ConfigError("min_iters_before_check must be >= 0");
  if (max_iters < min_iters_before_check) throw ConfigError("max_iters must be >= min_iters_before_check");
}

GammaVec default_gamma0(Eigen::Index m) { return GammaVec::Ones(m); }

GammaVec em_update(const GammaVec& gamma, const TStats& t) {
  GammaVec out(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    // Nonnegative in exact arithmetic since T2 gamma <= 1.
    out[i] = std::max(0.0, (t.t1[i] - t.t2[i]) * g * g + g);
  }
  return out;
}

GammaVec psbl_update(const GammaVec& gamma, const TStats& t, double p) {
  GammaVec out(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double g = gamma[i];
    if (g == 0.0) {
      out[i] = 0.0;
      continue;
    }
    const double ratio = t.t1[i] / t.t2[i];
    out[i] = (p == 1.0 ? ratio : std::pow(ratio, p)) * g;
  }
  return out;
}

GammaVec basic_update(const BasicRule& rule, const GammaVec& gamma, const TStats& t) {
  return std::visit(overloaded{
                        [&](const Em&) { return em_update(gamma, t); },
                        [&](const Mu&) { return psbl_update(gamma, t, 1.0); },
                        [&](const Psbl& r) { return psbl_update(gamma, t, r.p); },
                    },
                    rule);
}

GammaVec convex_update(const std::vector<BasicRule>& rules, const RVector& weights, const GammaVec& gamma,
                       const TStats& t) {
  if (rules.empty()) throw ConfigError("convex combination needs at least one rule");
  if (weights.size() != static_cast<Eigen::Index>(rules.size())) {
    throw ConfigError("weight vector length does not match the rule list");
  }
  GammaVec out = GammaVec::Zero(gamma.size());
  for (std::size_t q = 0; q < rules.size(); ++q) {
    const double w = weights[static_cast<Eigen::Index>(q)];
    if (w == 0.0) continue;
    out.noalias() += w * basic_update(rules[q], gamma, t);
  }
  return out;
}

GammaVec convex_majorizer_update(const GammaVec& gamma, const TStats& t, double alpha1) {
  validate_alpha(alpha1);
  const double a1 = alpha1;
  const double a2 = 1.0 - alpha1;
  const GammaVec em = em_update(gamma, t);
  GammaVec out(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double q = gamma[i] * gamma[i] * t.t1[i];
    const double eps = 4.0 * a2 * t.t2[i] * (0.5 * a1 * em[i] + a2 * q);
    const double den = 0.5 * a1 + std::sqrt(0.25 * a1 * a1 + eps);
    out[i] = den > 0.0 ? (a1 * em[i] + 2.0 * a2 * q) / den : 0.0;
  }
  return out;
}

GammaVec em_step(const SblProblem& problem, const GammaVec& gamma) {
  GammaVec out = em_update(gamma, t_stats(problem, gamma));
  ensure_finite(out, "EM step");
  return out;
}

GammaVec psbl_step(const SblProblem& problem, const GammaVec& gamma, double p) {
  validate_p(p);
  GammaVec out = psbl_update(gamma, t_stats(problem, gamma), p);
  ensure_finite(out, "p-SBL step");
  return out;
}

GammaVec convex_update_step(const SblProblem& problem, const GammaVec& gamma, const std::vector<BasicRule>& rules,
                            const RVector& weights) {
  validate_rule(ConvexUpdates{rules, {weights}});
  GammaVec out = convex_update(rules, weights, gamma, t_stats(problem, gamma));
  ensure_finite(out, "convex update step");
  return out;
}

GammaVec convex_majorizer_step(const SblProblem& problem, const GammaVec& gamma, double alpha1) {
  GammaVec out = convex_majorizer_update(gamma, t_stats(problem, gamma), alpha1);
  ensure_finite(out, "convex majorizer step");
  return out;
}

GammaVec em_step_posterior_form(const SblProblem& problem, const GammaVec& gamma) {
  const Posterior post = posterior(problem, gamma);
  GammaVec out = post.mean.rowwise().squaredNorm() / static_cast<double>(problem.l()) + post.err_diag;
  ensure_finite(out, "EM step");
  return out;
}

GammaVec mu_step_posterior_form(const SblProblem& problem, const GammaVec& gamma) {
  const Posterior post = posterior(problem, gamma);
  const RVector power = post.mean.rowwise().squaredNorm() / static_cast<double>(problem.l());
  GammaVec out(gamma.size());
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    const double den = gamma[i] - post.err_diag[i];
    // den = gamma^2 T2 > 0 analytically; it cancels to zero only once
    // gamma T2 is below roundoff, where the entry is negligible.
    out[i] = gamma[i] == 0.0 || den <= 0.0 ? 0.0 : power[i] / den * gamma[i];
  }
  ensure_finite(out, "MU step");
  return out;
}

GammaVec apply_rule(const UpdateRuleSpec& rule, int step, const GammaVec& gamma, const TStats& t) {
  return std::visit(
      overloaded{
          [&](const Em&) { return em_update(gamma, t); },
          [&](const Mu&) { return psbl_update(gamma, t, 1.0); },
          [&](const Psbl& r) { return psbl_update(gamma, t, r.p); },
          [&](const ConvexUpdates& r) {
            const auto row = std::min<std::size_t>(static_cast<std::size_t>(step), r.schedule.size() - 1);
            return convex_update(r.rules, r.schedule[row], gamma, t);
          },
          [&](const ConvexMajorizers& r) {
            const auto row = std::min<std::size_t>(static_cast<std::size_t>(step), r.alpha1.size() - 1);
            return convex_majorizer_update(gamma, t, r.alpha1[row]);
          },
          [&](const Dnn&) -> GammaVec { throw ConfigError("dnn steps need the problem; use dnn_step"); },
      },
      rule);
}

RunTrace run(const SblProblem& problem, const UpdateRuleSpec& rule, const GammaVec& g0, const StoppingCfg& stop,
             const RunOptions& opts) {
  stop.validate();
  validate_rule(rule);
  check_gamma(g0, problem.m());
  if (const auto* dnn = std::get_if<Dnn>(&rule)) return dnn_run(problem, *dnn->model, g0, opts);

  RunTrace trace;
  if (opts.record_majorizer_gaps) trace.majorizer_gaps.emplace();
  const auto* convmaj = std::get_if<ConvexMajorizers>(&rule);

  GammaVec gamma = g0;
  trace.gammas.push_back(gamma);
  Evaluation eval;
  try {
    eval = evaluate(problem, gamma);
  } catch (const NumericError& e) {
    throw RunAborted(std::string("evaluation failed at the initial point: ") + e.what(), trace);
  }
  trace.nll_values.push_back(eval.nll);

  const int first_check = std::max(1, stop.min_iters_before_check);
  for (int k = 1; k <= stop.max_iters; ++k) {
    GammaVec next = apply_rule(rule, k - 1, gamma, eval.t);
    if (!next.allFinite()) throw RunAborted("non-finite iterate at step " + std::to_string(k), trace);

    if (trace.majorizer_gaps) {
      const double gap = convmaj ? combined_gap_from(next, gamma, eval.t,
                                                     convmaj->alpha1[std::min<std::size_t>(
                                                         static_cast<std::size_t>(k - 1), convmaj->alpha1.size() - 1)])
                                 : psbl_gap_from(next, gamma, eval.t);
      trace.majorizer_gaps->push_back(gap);
    }

    const double base = gamma.norm();
    const double rel = base > 0.0 ? (gamma - next).norm() / base : 0.0;
    gamma = std::move(next);
    try {
      eval = evaluate(problem, gamma);
    } catch (const NumericError& e) {
      throw RunAborted(std::string("evaluation failed at step ") + std::to_string(k) + ": " + e.what(), trace);
    }
    if (opts.record_gammas) {
      trace.gammas.push_back(gamma);
    } else {
      trace.gammas.back() = gamma;
    }
    trace.nll_values.push_back(eval.nll);
    trace.iterations_used = k;
    if (k >= first_check && rel <= stop.rel_tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

}  // namespace sbl
