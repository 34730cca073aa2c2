#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbl/datagen.hpp"
#include "sbl/updates.hpp"

namespace sbl {

/// Outcome of one rule on one dataset instance.
struct InstanceResult {
  bool failed = false;
  std::string error;  // set when failed
  double mse = 0.0;
  double mse_frob = 0.0;
  int psr = 0;
  int iterations = 0;
  bool converged = false;
  double final_nll = 0.0;
};

InstanceResult evaluate_instance(const SblProblem& problem, const CMatrix& x_true, const Support& support,
                                 const UpdateRuleSpec& rule, const StoppingCfg& stop, double gamma0 = 1.0);

/// One CSV row: a rule on one (s, snr, L) cell.
struct BenchRow {
  std::string rule;
  std::string p_or_alpha;
  int s = 0;
  double snr_db = 0.0;
  int snapshots = 0;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  double mean_mse = 0.0;
  double mean_mse_frob = 0.0;
  double psr = 0.0;
  double mean_iters = 0.0;
  /// Standard error of the mean of the iteration counts (not in the CSV).
  double iters_stderr = 0.0;
  double mean_final_nll = 0.0;
  std::size_t n_fail = 0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
};

struct BenchConfig {
  std::vector<UpdateRuleSpec> rules;
  StoppingCfg stop;
  double gamma0 = 1.0;
  unsigned jobs = 1;
};

/// Rows ordered by rule (as given), then by dataset cell. Failed instances
/// count toward n_fail and are excluded from every mean; runs that hit
/// max_iters contribute max_iters to mean_iters.
std::vector<BenchRow> bench(const Dataset& ds, const BenchConfig& cfg);

/// Empty for EM and convex updates.
std::string p_or_alpha(const UpdateRuleSpec& rule);

inline constexpr const char* kBenchCsvHeader =
    "rule,p_or_alpha,s,snr_db,L,n,m,mean_mse,mean_mse_frob,psr,mean_iters,mean_final_nll,n_fail,n_trials,seed";

std::string bench_csv(const std::vector<BenchRow>& rows);
/// Sidecar with the dataset config, rule list, stopping rule and per-row
/// standard errors.
std::string bench_sidecar_json(const Dataset& ds, const BenchConfig& cfg, const std::vector<BenchRow>& rows);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);
/// Shortest round-trip text, "nan" for NaN.
std::string csv_number(double v);

}  // namespace sbl
