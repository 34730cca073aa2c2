#include "sbl/bench.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sbl/metrics.hpp"
#include "sbl/parallel.hpp"
#include "sbl/rule_spec.hpp"

namespace sbl {

InstanceResult evaluate_instance(const SblProblem& problem, const CMatrix& x_true, const Support& support,
                                 const UpdateRuleSpec& rule, const StoppingCfg& stop, double gamma0) {
  InstanceResult r;
  try {
    RunOptions opts;
    opts.record_gammas = false;
    const GammaVec g0 = GammaVec::Constant(problem.m(), gamma0);
    const RunTrace trace = run(problem, rule, g0, stop, opts);
    const GammaVec& g = trace.final_gamma();
    CMatrix mean;
    const Evaluation e = evaluate(problem, g, &mean);
    r.mse = mse(mean, x_true);
    r.mse_frob = mse_frob(mean, x_true);
    r.psr = psr(g, support);
    r.iterations = trace.iterations_used;
    r.converged = trace.converged;
    r.final_nll = e.nll;
  } catch (const NumericError& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

std::string p_or_alpha(const UpdateRuleSpec& rule) {
  if (std::holds_alternative<Mu>(rule)) return "1";
  if (const auto* p = std::get_if<Psbl>(&rule)) return format_number(p->p);
  if (const auto* c = std::get_if<ConvexMajorizers>(&rule)) {
    if (c->alpha1.size() == 1) return format_number(c->alpha1.front());
    return "schedule";
  }
  return "";
}

std::vector<BenchRow> bench(const Dataset& ds, const BenchConfig& cfg) {
  if (cfg.rules.empty()) throw ConfigError("bench needs at least one rule");
  cfg.stop.validate();
  for (const auto& r : cfg.rules) validate_rule(r);

  const std::size_t n_inst = ds.size();
  const std::size_t n_rules = cfg.rules.size();
  std::vector<InstanceResult> results(n_inst * n_rules);
  parallel_for(results.size(), cfg.jobs, [&](std::size_t job) {
    const std::size_t ri = job / n_inst;
    const std::size_t k = job % n_inst;
    const auto& e = ds.entries[k];
    results[job] = evaluate_instance(ds.problem(k), e.x, e.support, cfg.rules[ri], cfg.stop, cfg.gamma0);
  });

  // Cells in order of first appearance.
  std::map<std::size_t, std::vector<std::size_t>> by_cell;
  for (std::size_t k = 0; k < n_inst; ++k) by_cell[ds.entries[k].cell].push_back(k);

  std::vector<BenchRow> rows;
  for (std::size_t ri = 0; ri < n_rules; ++ri) {
    for (const auto& [cell, members] : by_cell) {
      const auto& first = ds.entries[members.front()];
      BenchRow row;
      row.rule = rule_name(cfg.rules[ri]);
      row.p_or_alpha = p_or_alpha(cfg.rules[ri]);
      row.s = first.sparsity;
      row.snr_db = first.snr_db;
      row.snapshots = first.snapshots();
      row.n = ds.matrices[first.matrix_index].rows();
      row.m = ds.matrices[first.matrix_index].cols();
      row.seed = ds.config.seed;
      row.n_trials = members.size();
      std::vector<double> m1, m2, p, it, nl;
      for (std::size_t k : members) {
        const auto& r = results[ri * n_inst + k];
        if (r.failed) {
          ++row.n_fail;
          continue;
        }
        m1.push_back(r.mse);
        m2.push_back(r.mse_frob);
        p.push_back(r.psr);
        it.push_back(r.iterations);
        nl.push_back(r.final_nll);
      }
      const double n_ok = static_cast<double>(m1.size());
      if (m1.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.mean_mse = row.mean_mse_frob = row.psr = row.mean_iters = row.mean_final_nll = row.iters_stderr = nan;
      } else {
        row.mean_mse = pairwise_sum(m1) / n_ok;
        row.mean_mse_frob = pairwise_sum(m2) / n_ok;
        row.psr = pairwise_sum(p) / n_ok;
        row.mean_iters = pairwise_sum(it) / n_ok;
        row.mean_final_nll = pairwise_sum(nl) / n_ok;
        if (it.size() > 1) {
          std::vector<double> dev(it.size());
          for (std::size_t i = 0; i < it.size(); ++i) dev[i] = (it[i] - row.mean_iters) * (it[i] - row.mean_iters);
          row.iters_stderr = std::sqrt(pairwise_sum(dev) / (n_ok - 1.0) / n_ok);
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(double v) { return std::isnan(v) ? "nan" : format_number(v); }

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.rule) << ',' << r.p_or_alpha << ',' << r.s << ',' << csv_number(r.snr_db) << ','
        << r.snapshots << ',' << r.n << ',' << r.m << ',' << csv_number(r.mean_mse) << ','
        << csv_number(r.mean_mse_frob) << ',' << csv_number(r.psr) << ',' << csv_number(r.mean_iters) << ','
        << csv_number(r.mean_final_nll) << ',' << r.n_fail << ',' << r.n_trials << ',' << r.seed << '\n';
  }
  return out.str();
}

std::string bench_sidecar_json(const Dataset& ds, const BenchConfig& cfg, const std::vector<BenchRow>& rows) {
  using nlohmann::json;
  json j;
  j["dataset_config"] = json::parse(dataset_config_to_json(ds.config));
  j["snr_convention"] = kSnrConvention;
  json rules = json::array();
  for (const auto& r : cfg.rules) rules.push_back(format_rule(r));
  j["rules"] = rules;
  j["stop"] = {{"rel_tol", cfg.stop.rel_tol},
               {"max_iters", cfg.stop.max_iters},
               {"min_iters_before_check", cfg.stop.min_iters_before_check}};
  j["gamma0"] = cfg.gamma0;
  j["mse_normalization"] = "mean_mse = ||X - Xhat||_F^2 / (M L); mean_mse_frob = ||X - Xhat||_F^2";
  j["psr_tie_break"] = "lowest index first";
  json se = json::array();
  for (const auto& r : rows) se.push_back(std::isnan(r.iters_stderr) ? json(nullptr) : json(r.iters_stderr));
  j["iters_stderr"] = se;
  return j.dump(2);
}

}  // namespace sbl
