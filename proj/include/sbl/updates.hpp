#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sbl/error.hpp"
#include "sbl/model.hpp"

namespace sbl {

struct DnnSblModel;

/// EM-SBL: gamma' = (T1 - T2) gamma^2 + gamma.
struct Em {};
/// Tipping's multiplicative update, identical to Psbl{1}.
struct Mu {};
/// gamma' = (T1/T2)^p gamma, 0 < p <= 1.
struct Psbl {
  double p = 1.0;
};

/// A rule that descends the p-SBL majorizer; these are what may be mixed
/// by a convex combination of update rules.
using BasicRule = std::variant<Em, Mu, Psbl>;

/// Convex combination of update rules. `schedule[j]` holds the simplex
/// weights for step j; the last row is reused once the schedule runs out.
struct ConvexUpdates {
  std::vector<BasicRule> rules;
  std::vector<RVector> schedule;
};

/// Minimizer of alpha1 g_EM + (1 - alpha1) g_pSBL, per-step alpha1 schedule
/// (last entry reused).
struct ConvexMajorizers {
  std::vector<double> alpha1;
};

/// Unrolled network; runs exactly J steps.
struct Dnn {
  std::shared_ptr<const DnnSblModel> model;
  std::string source;  // path the weights came from, for reporting
};

using UpdateRuleSpec = std::variant<Em, Mu, Psbl, ConvexUpdates, ConvexMajorizers, Dnn>;

/// Throws ConfigError for p outside (0, 1], non-simplex weights, etc.
void validate_rule(const UpdateRuleSpec& rule);
void validate_simplex(const RVector& w, double tol = 1e-9);

struct StoppingCfg {
  double rel_tol = 1e-6;
  int max_iters = 500;
  int min_iters_before_check = 10;

  void validate() const;
};

struct RunOptions {
  bool record_gammas = true;
  /// Record the majorizer gap g(gamma_{j+1}; gamma_j) per step. The p-SBL
  /// majorizer is used for EM/p-SBL/convex-update rules, the combined
  /// majorizer for ConvexMajorizers; DNN runs record nothing.
  bool record_majorizer_gaps = false;
};

struct RunTrace {
  std::vector<GammaVec> gammas;     // gamma_0 .. gamma_k (or just the last one)
  std::vector<double> nll_values;   // nll(gamma_0) .. nll(gamma_k)
  int iterations_used = 0;
  bool converged = false;
  std::optional<std::vector<double>> majorizer_gaps;

  const GammaVec& final_gamma() const { return gammas.back(); }
};

/// Raised when an iterate turns non-finite; carries the trace up to the
/// last good iterate.
class RunAborted : public NumericError {
 public:
  RunAborted(const std::string& what, RunTrace partial) : NumericError(what), partial_(std::move(partial)) {}
  const RunTrace& partial() const noexcept { return partial_; }

 private:
  RunTrace partial_;
};

// Elementwise steps on precomputed statistics. `t` must be T(gamma).
GammaVec em_update(const GammaVec& gamma, const TStats& t);
GammaVec psbl_update(const GammaVec& gamma, const TStats& t, double p);
GammaVec basic_update(const BasicRule& rule, const GammaVec& gamma, const TStats& t);
GammaVec convex_update(const std::vector<BasicRule>& rules, const RVector& weights, const GammaVec& gamma,
                       const TStats& t);
GammaVec convex_majorizer_update(const GammaVec& gamma, const TStats& t, double alpha1);

// Problem-level steps (one factorization each).
GammaVec em_step(const SblProblem& problem, const GammaVec& gamma);
GammaVec psbl_step(const SblProblem& problem, const GammaVec& gamma, double p);
GammaVec convex_update_step(const SblProblem& problem, const GammaVec& gamma, const std::vector<BasicRule>& rules,
                            const RVector& weights);
GammaVec convex_majorizer_step(const SblProblem& problem, const GammaVec& gamma, double alpha1);

/// EM written with posterior moments: (1/L) sum_l |x_l|^2 + diag(Sigma_e).
GammaVec em_step_posterior_form(const SblProblem& problem, const GammaVec& gamma);
/// Tipping's MU written with posterior moments: (1/L) sum |x|^2 / (gamma - diag Sigma_e) * gamma.
GammaVec mu_step_posterior_form(const SblProblem& problem, const GammaVec& gamma);

/// One step of any classical rule at step index j.
GammaVec apply_rule(const UpdateRuleSpec& rule, int step, const GammaVec& gamma, const TStats& t);

RunTrace run(const SblProblem& problem, const UpdateRuleSpec& rule, const GammaVec& g0, const StoppingCfg& stop,
             const RunOptions& opts = {});

/// Default initialization gamma_0 = 1.
GammaVec default_gamma0(Eigen::Index m);

std::string rule_name(const BasicRule& rule);
std::string rule_name(const UpdateRuleSpec& rule);

}  // namespace sbl
