// Command-line driver for the SBL lab.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbl/bench.hpp"
#include "sbl/combo.hpp"
#include "sbl/dataset_io.hpp"
#include "sbl/dnn.hpp"
#include "sbl/metrics.hpp"
#include "sbl/rule_spec.hpp"
#include "sbl/verify.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sbl::IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw sbl::IoError(path, "cannot open for writing");
  out << text;
  if (!out) throw sbl::IoError(path, "write failed");
}

int report(const char* kind, const std::string& message, int code) {
  nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << '\n';
  return code;
}

struct StopFlags {
  double rel_tol = 1e-6;
  int max_iters = 500;
  int min_iters = 10;
  double gamma0 = 1.0;

  void add(CLI::App* app) {
    app->add_option("--rel-tol", rel_tol, "Relative change threshold ||g_j - g_j+1|| / ||g_j||")->capture_default_str();
    app->add_option("--max-iters", max_iters, "Iteration cap")->capture_default_str();
    app->add_option("--min-iters", min_iters, "Iterations before the stopping test applies")->capture_default_str();
    app->add_option("--gamma0", gamma0, "Constant initial gamma")->capture_default_str();
  }
  sbl::StoppingCfg cfg() const {
    sbl::StoppingCfg s{rel_tol, max_iters, min_iters};
    s.validate();
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Bayesian learning lab: data generation, solvers, benchmarks, learned combinations"};
  app.require_subcommand(1);
  unsigned jobs = 1;
  app.add_option("--jobs,-j", jobs, "Worker threads (0 = one per hardware thread)")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset file from a JSON config");
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config", gen_config, "Dataset config JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  gen->add_option("--seed", gen_seed, "Override the config's base seed");

  // solve
  auto* solve = app.add_subcommand("solve", "Run one rule on every dataset instance and write per-iteration traces");
  std::string solve_ds, solve_rule, solve_out;
  StopFlags solve_stop;
  solve->add_option("--dataset", solve_ds, "Dataset file")->required()->check(CLI::ExistingFile);
  solve->add_option("--rule", solve_rule, "Rule spec, e.g. em, psbl:0.5, convmaj:0.3")->required();
  solve->add_option("--out", solve_out, "Trace CSV (instance,iteration,nll,gamma_norm)")->required();
  solve_stop.add(solve);

  // bench
  auto* bench = app.add_subcommand("bench", "Per-cell metrics for a list of rules");
  std::string bench_ds, bench_rules, bench_out, bench_sidecar;
  StopFlags bench_stop;
  bench->add_option("--dataset", bench_ds, "Dataset file")->required()->check(CLI::ExistingFile);
  bench->add_option("--rules", bench_rules, "Rule list separated by ';' or ','")->required();
  bench->add_option("--out", bench_out, "Result CSV")->required();
  bench->add_option("--sidecar", bench_sidecar, "Config sidecar JSON (default: <out>.json)");
  bench_stop.add(bench);

  // learn-combo
  auto* learn = app.add_subcommand("learn-combo", "Learn per-iteration convex weights by unrolled training");
  std::string learn_mode = "rules", learn_train, learn_val, learn_out, learn_traj;
  std::string learn_rules = "psbl:0.25,psbl:0.5,psbl:0.75,psbl:1";
  int learn_depth = 10;
  double learn_c = 0.95;
  sbl::ComboTrainConfig learn_cfg;
  learn->add_option("--mode", learn_mode, "rules | majorizers")->capture_default_str();
  learn->add_option("--train", learn_train, "Training dataset")->required()->check(CLI::ExistingFile);
  learn->add_option("--val", learn_val, "Validation dataset")->required()->check(CLI::ExistingFile);
  learn->add_option("--out", learn_out, "Trained combo JSON")->required();
  learn->add_option("--trajectory", learn_traj, "Weight CSV (default: <out>.weights.csv)");
  learn->add_option("--rules", learn_rules, "Basic rules to mix (rules mode)")->capture_default_str();
  learn->add_option("--depth,-J", learn_depth, "Unrolled iterations J")->capture_default_str();
  learn->add_option("--decay,-c", learn_c, "Loss decay c, weights c^(J-j)")->capture_default_str();
  learn->add_option("--epochs", learn_cfg.epochs, "Epochs")->capture_default_str();
  learn->add_option("--batch-size", learn_cfg.batch_size, "Minibatch size")->capture_default_str();
  learn->add_option("--lr", learn_cfg.learning_rate, "Adam learning rate")->capture_default_str();
  learn->add_option("--beta1", learn_cfg.beta1, "Adam first-moment decay")->capture_default_str();
  learn->add_option("--beta2", learn_cfg.beta2, "Adam second-moment decay")->capture_default_str();
  learn->add_option("--weight-decay", learn_cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
  learn->add_option("--fd-step", learn_cfg.fd_step, "Finite-difference step")->capture_default_str();
  learn->add_option("--seed", learn_cfg.seed, "Minibatch shuffling seed")->capture_default_str();

  // dnn-infer
  auto* infer = app.add_subcommand("dnn-infer", "Run an unrolled network on a dataset");
  std::string infer_weights, infer_ds, infer_out;
  infer->add_option("--weights", infer_weights, "Weight JSON")->required()->check(CLI::ExistingFile);
  infer->add_option("--dataset", infer_ds, "Dataset file")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", infer_out, "Per-instance CSV")->required();

  // dnn-init
  auto* init = app.add_subcommand("dnn-init", "Write randomly initialized network weights");
  int init_depth = 15;
  Eigen::Index init_width = 64;
  std::uint64_t init_seed = 0;
  std::string init_transform = "log1p", init_out;
  init->add_option("--depth,-J", init_depth, "Iterations J")->capture_default_str();
  init->add_option("--width,-d", init_width, "Hidden width d")->capture_default_str();
  init->add_option("--seed", init_seed, "Initialization seed")->capture_default_str();
  init->add_option("--transform", init_transform, "log1p | identity")->capture_default_str();
  init->add_option("--out", init_out, "Weight JSON")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Run the invariant and majorizer property suite");
  sbl::VerifyConfig vcfg;
  verify->add_option("--seed", vcfg.seed, "Base seed")->capture_default_str();
  verify->add_option("--instances", vcfg.instances, "Random instances per descent property")->capture_default_str();
  verify->add_option("--draws", vcfg.draws, "Random draws per pointwise property")->capture_default_str();
  verify->add_option("--max-iters", vcfg.max_iters, "Iterations per descent run")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitConfig);
  }

  try {
    if (*gen) {
      sbl::DatasetConfig cfg = sbl::parse_dataset_config(read_file(gen_config));
      if (gen_seed) cfg.seed = *gen_seed;
      const sbl::Dataset ds = sbl::make_dataset(cfg);
      sbl::write_dataset(ds, gen_out);
      std::cout << "wrote " << ds.size() << " instances to " << gen_out << '\n';
    } else if (*solve) {
      const sbl::Dataset ds = sbl::read_dataset(solve_ds);
      const sbl::UpdateRuleSpec rule = sbl::parse_rule(solve_rule);
      const sbl::StoppingCfg stop = solve_stop.cfg();
      std::ostringstream csv;
      csv << "instance,iteration,nll,gamma_norm\n";
      for (std::size_t k = 0; k < ds.size(); ++k) {
        const sbl::SblProblem p = ds.problem(k);
        const sbl::RunTrace tr = sbl::run(p, rule, sbl::GammaVec::Constant(p.m(), solve_stop.gamma0), stop);
        for (std::size_t j = 0; j < tr.gammas.size(); ++j) {
          csv << k << ',' << j << ',' << sbl::csv_number(tr.nll_values[j]) << ','
              << sbl::csv_number(tr.gammas[j].norm()) << '\n';
        }
      }
      write_file(solve_out, csv.str());
    } else if (*bench) {
      const sbl::Dataset ds = sbl::read_dataset(bench_ds);
      sbl::BenchConfig cfg;
      cfg.rules = sbl::parse_rule_list(bench_rules);
      cfg.stop = bench_stop.cfg();
      cfg.gamma0 = bench_stop.gamma0;
      cfg.jobs = jobs;
      const auto rows = sbl::bench(ds, cfg);
      write_file(bench_out, sbl::bench_csv(rows));
      write_file(bench_sidecar.empty() ? bench_out + ".json" : bench_sidecar, sbl::bench_sidecar_json(ds, cfg, rows));
    } else if (*learn) {
      const sbl::Dataset train = sbl::read_dataset(learn_train);
      const sbl::Dataset val = sbl::read_dataset(learn_val);
      const sbl::ComboMode mode = sbl::parse_combo_mode(learn_mode);
      std::vector<sbl::BasicRule> rules;
      if (mode == sbl::ComboMode::Rules) {
        for (const auto& r : sbl::parse_rule_list(learn_rules)) {
          rules.push_back(std::visit(
              [](const auto& v) -> sbl::BasicRule {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, sbl::Em> || std::is_same_v<T, sbl::Mu> || std::is_same_v<T, sbl::Psbl>) {
                  return v;
                } else {
                  throw sbl::ConfigError("learn-combo mixes only em, mu and psbl rules");
                }
              },
              r));
        }
      }
      learn_cfg.jobs = jobs;
      const auto res = sbl::train_combo(sbl::make_combo(mode, rules, learn_depth, learn_c), train, val, learn_cfg);
      write_file(learn_out, sbl::combo_to_json(res.model, learn_cfg));
      write_file(learn_traj.empty() ? learn_out + ".weights.csv" : learn_traj, sbl::weight_trajectory_csv(res.model));
      for (std::size_t e = 0; e < res.history.val_loss.size(); ++e) {
        std::cout << "epoch " << e + 1 << " train " << res.history.train_loss[e] << " val " << res.history.val_loss[e]
                  << '\n';
      }
    } else if (*infer) {
      const sbl::DnnSblModel model = sbl::load_weights(infer_weights);
      const sbl::Dataset ds = sbl::read_dataset(infer_ds);
      std::ostringstream csv;
      csv << "instance,s,snr_db,L,mse,mse_frob,psr,final_nll\n";
      for (std::size_t k = 0; k < ds.size(); ++k) {
        const auto& e = ds.entries[k];
        const sbl::SblProblem p = ds.problem(k);
        const sbl::RunTrace tr = sbl::dnn_run(p, model, sbl::GammaVec::Ones(p.m()), {false, false});
        sbl::CMatrix mean;
        const sbl::Evaluation ev = sbl::evaluate(p, tr.final_gamma(), &mean);
        csv << k << ',' << e.sparsity << ',' << sbl::csv_number(e.snr_db) << ',' << e.snapshots() << ','
            << sbl::csv_number(sbl::mse(mean, e.x)) << ',' << sbl::csv_number(sbl::mse_frob(mean, e.x)) << ','
            << sbl::psr(tr.final_gamma(), e.support) << ',' << sbl::csv_number(ev.nll) << '\n';
      }
      write_file(infer_out, csv.str());
    } else if (*init) {
      const auto model =
          sbl::random_model(init_depth, init_width, init_seed, sbl::parse_input_transform(init_transform));
      sbl::save_weights(model, init_out);
    } else if (*verify) {
      vcfg.jobs = jobs;
      const auto results = sbl::run_property_suite(vcfg);
      bool all = true;
      for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases, " << r.detail << ")\n";
        all = all && r.passed;
      }
      if (!all) return report("verification", "one or more properties failed", kExitNumeric);
    }
  } catch (const sbl::NumericError& e) {
    return report(e.kind(), e.what(), kExitNumeric);
  } catch (const sbl::Error& e) {
    return report(e.kind(), e.what(), kExitConfig);
  } catch (const std::exception& e) {
    return report("config", e.what(), kExitConfig);
  }
  return 0;
}
