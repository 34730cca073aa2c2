#include "sbl/combo.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "sbl/dnn.hpp"
#include "sbl/parallel.hpp"
#include "sbl/rng.hpp"
#include "sbl/rule_spec.hpp"

namespace sbl {

using nlohmann::json;

std::string to_string(ComboMode m) { return m == ComboMode::Rules ? "rules" : "majorizers"; }

ComboMode parse_combo_mode(const std::string& s) {
  if (s == "rules") return ComboMode::Rules;
  if (s == "majorizers") return ComboMode::Majorizers;
  throw ConfigError("unknown combo mode '" + s + "' (expected rules or majorizers)");
}

RVector ComboModel::weights(int j) const { return softmax(logits.row(j).transpose()); }

std::vector<std::string> ComboModel::column_names() const {
  if (mode == ComboMode::Majorizers) return {"g_em", "g_psbl"};
  std::vector<std::string> out;
  for (const auto& r : rules) out.push_back(rule_name(r));
  return out;
}

void ComboModel::validate() const {
  if (logits.rows() < 1) throw ConfigError("combo depth J must be >= 1");
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("decay c must lie in (0, 1]");
  if (!logits.allFinite()) throw NumericError("combo logits are not finite");
  if (mode == ComboMode::Majorizers) {
    if (logits.cols() != 2) throw ConfigError("majorizer combos have exactly two columns");
    return;
  }
  if (rules.empty()) throw ConfigError("rule combos need at least one rule");
  if (logits.cols() != static_cast<Eigen::Index>(rules.size())) {
    throw ConfigError("logit columns do not match the rule list");
  }
  for (const auto& r : rules) validate_rule(UpdateRuleSpec{std::visit([](auto v) -> UpdateRuleSpec { return v; }, r)});
}

UpdateRuleSpec ComboModel::as_rule() const {
  if (mode == ComboMode::Majorizers) {
    ConvexMajorizers cm;
    for (int j = 0; j < depth(); ++j) cm.alpha1.push_back(weights(j)[0]);
    return cm;
  }
  ConvexUpdates cu;
  cu.rules = rules;
  for (int j = 0; j < depth(); ++j) cu.schedule.push_back(weights(j));
  return cu;
}

ComboModel make_combo(ComboMode mode, std::vector<BasicRule> rules, int depth, double c) {
  ComboModel m;
  m.mode = mode;
  m.c = c;
  const Eigen::Index q = mode == ComboMode::Majorizers ? 2 : static_cast<Eigen::Index>(rules.size());
  m.rules = std::move(rules);
  if (mode == ComboMode::Majorizers) m.rules.clear();
  m.logits = RMatrix::Zero(depth, q);
  m.validate();
  return m;
}

GammaVec combo_update(const ComboModel& model, int j, const GammaVec& gamma, const TStats& t) {
  const RVector w = model.weights(j);
  if (model.mode == ComboMode::Majorizers) return convex_majorizer_update(gamma, t, w[0]);
  return convex_update(model.rules, w, gamma, t);
}

namespace {

// Everything the unrolled loss needs at each depth, so a perturbation of
// row j only recomputes steps j..J-1.
struct Trajectory {
  std::vector<GammaVec> gammas;  // gamma_0 .. gamma_J
  std::vector<TStats> stats;     // T(gamma_0) .. T(gamma_{J-1})
  std::vector<double> terms;     // terms[k] = weighted error of gamma_{k+1}
};

template <class Step>
double unroll_from(const Step& step, int depth, double c, const SblProblem& problem, const CMatrix& x_true, int from,
                   GammaVec gamma, TStats t, Trajectory* keep) {
  double loss = 0.0;
  CMatrix mean;
  for (int j = from; j < depth; ++j) {
    if (keep) {
      keep->gammas.push_back(gamma);
      keep->stats.push_back(t);
    }
    gamma = step(j, gamma, t);
    if (!gamma.allFinite()) throw NumericError("unrolled iterate is not finite");
    const Evaluation e = evaluate(problem, gamma, &mean);
    t = e.t;
    const double term = std::pow(c, depth - (j + 1)) * (x_true - mean).squaredNorm();
    if (keep) keep->terms.push_back(term);
    loss += term;
  }
  if (keep) keep->gammas.push_back(gamma);
  return loss;
}

template <class Step>
double unroll(const Step& step, int depth, double c, const SblProblem& problem, const CMatrix& x_true,
              Trajectory* keep = nullptr) {
  GammaVec g0 = GammaVec::Ones(problem.m());
  TStats t0 = t_stats(problem, g0);
  return unroll_from(step, depth, c, problem, x_true, 0, std::move(g0), std::move(t0), keep);
}

double unrolled_model_loss(const ComboModel& model, const SblProblem& problem, const CMatrix& x_true,
                           Trajectory* keep = nullptr) {
  const auto step = [&](int j, const GammaVec& g, const TStats& t) { return combo_update(model, j, g, t); };
  return unroll(step, model.depth(), model.c, problem, x_true, keep);
}

// Loss of `perturbed`, which differs from the model behind `base` only in
// rows >= j.
double loss_from_row(const ComboModel& perturbed, const Trajectory& base, int j, const SblProblem& problem,
                     const CMatrix& x_true) {
  double prefix = 0.0;
  for (int k = 0; k < j; ++k) prefix += base.terms[static_cast<std::size_t>(k)];
  const auto step = [&](int jj, const GammaVec& g, const TStats& t) { return combo_update(perturbed, jj, g, t); };
  return prefix + unroll_from(step, perturbed.depth(), perturbed.c, problem, x_true, j,
                              base.gammas[static_cast<std::size_t>(j)], base.stats[static_cast<std::size_t>(j)],
                              nullptr);
}

RMatrix sample_gradient(const ComboModel& model, const SblProblem& problem, const CMatrix& x_true, double h,
                        bool central) {
  Trajectory base;
  const double f0 = unrolled_model_loss(model, problem, x_true, &base);
  RMatrix g(model.logits.rows(), model.logits.cols());
  ComboModel probe = model;
  for (int j = 0; j < model.depth(); ++j) {
    for (Eigen::Index q = 0; q < model.width(); ++q) {
      const double orig = model.logits(j, q);
      probe.logits(j, q) = orig + h;
      const double fp = loss_from_row(probe, base, j, problem, x_true);
      if (central) {
        probe.logits(j, q) = orig - h;
        const double fm = loss_from_row(probe, base, j, problem, x_true);
        g(j, q) = (fp - fm) / (2.0 * h);
      } else {
        g(j, q) = (fp - f0) / h;
      }
      probe.logits(j, q) = orig;
    }
  }
  return g;
}

}  // namespace

double unrolled_loss(const ComboModel& model, const SblProblem& problem, const CMatrix& x_true) {
  model.validate();
  return unrolled_model_loss(model, problem, x_true);
}

double unrolled_loss(const BasicRule& rule, int depth, double c, const SblProblem& problem, const CMatrix& x_true) {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  const auto step = [&](int, const GammaVec& g, const TStats& t) { return basic_update(rule, g, t); };
  return unroll(step, depth, c, problem, x_true);
}

namespace {

template <class Fn>
double mean_over(const Dataset& ds, unsigned jobs, Fn&& fn) {
  if (ds.size() == 0) throw ConfigError("dataset is empty");
  std::vector<double> v(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t k) { v[k] = fn(ds.problem(k), ds.entries[k].x); });
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

double mean_loss(const ComboModel& model, const Dataset& ds, unsigned jobs) {
  model.validate();
  return mean_over(ds, jobs, [&](const SblProblem& p, const CMatrix& x) { return unrolled_model_loss(model, p, x); });
}

double mean_loss(const BasicRule& rule, int depth, double c, const Dataset& ds, unsigned jobs) {
  return mean_over(ds, jobs, [&](const SblProblem& p, const CMatrix& x) { return unrolled_loss(rule, depth, c, p, x); });
}

RMatrix loss_gradient(const ComboModel& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                      double step, bool central, unsigned jobs) {
  model.validate();
  if (indices.empty()) throw ConfigError("gradient needs at least one sample");
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  std::vector<RMatrix> per(indices.size());
  parallel_for(indices.size(), jobs, [&](std::size_t b) {
    const std::size_t k = indices[b];
    per[b] = sample_gradient(model, ds.problem(k), ds.entries[k].x, step, central);
  });
  RMatrix g = RMatrix::Zero(model.logits.rows(), model.logits.cols());
  for (const auto& p : per) g += p;
  return g / static_cast<double>(indices.size());
}

void ComboTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0) || !(weight_decay >= 0.0) || !(fd_step > 0.0)) {
    throw ConfigError("epsilon and fd_step must be positive, weight decay nonnegative");
  }
}

ComboTrainResult train_combo(const ComboModel& init, const Dataset& train, const Dataset& val,
                             const ComboTrainConfig& cfg) {
  init.validate();
  cfg.validate();
  if (train.size() == 0 || val.size() == 0) throw ConfigError("training and validation sets must be non-empty");

  ComboTrainResult res{init, {}};
  ComboModel& model = res.model;
  RMatrix m1 = RMatrix::Zero(model.logits.rows(), model.logits.cols());
  RMatrix m2 = m1;
  long t = 0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0xC0B0));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<double> batch_losses;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      RMatrix g;
      double loss = 0.0;
      try {
        g = loss_gradient(model, train, batch, cfg.fd_step, true, cfg.jobs);
        for (std::size_t k : batch) loss += unrolled_model_loss(model, train.problem(k), train.entries[k].x);
      } catch (const NumericError& e) {
        throw ComboDiverged(std::string("training diverged: ") + e.what(), res.history);
      }
      loss /= static_cast<double>(batch.size());
      if (!std::isfinite(loss) || !g.allFinite()) throw ComboDiverged("training loss is not finite", res.history);
      batch_losses.push_back(loss);

      ++t;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
      const RMatrix mhat = m1 / c1;
      const RMatrix vhat = m2 / c2;
      model.logits -= cfg.learning_rate *
                      (mhat.array() / (vhat.array().sqrt() + cfg.epsilon) + cfg.weight_decay * model.logits.array())
                          .matrix();
    }

    double tr = 0.0;
    for (double b : batch_losses) tr += b;
    res.history.train_loss.push_back(tr / static_cast<double>(batch_losses.size()));
    double vl = 0.0;
    try {
      vl = mean_loss(model, val, cfg.jobs);
    } catch (const NumericError& e) {
      throw ComboDiverged(std::string("validation diverged: ") + e.what(), res.history);
    }
    if (!std::isfinite(vl)) throw ComboDiverged("validation loss is not finite", res.history);
    res.history.val_loss.push_back(vl);
    RMatrix w(model.logits.rows(), model.logits.cols());
    for (int j = 0; j < model.depth(); ++j) w.row(j) = model.weights(j).transpose();
    res.history.weights.push_back(std::move(w));
  }
  return res;
}

std::string combo_to_json(const ComboModel& model, const ComboTrainConfig& cfg) {
  json j;
  j["mode"] = to_string(model.mode);
  json rules = json::array();
  for (const auto& r : model.rules) rules.push_back(rule_name(r));
  j["rules"] = rules;
  j["J"] = model.depth();
  j["Q"] = model.width();
  j["c"] = model.c;
  std::vector<double> flat;
  for (Eigen::Index r = 0; r < model.logits.rows(); ++r) {
    for (Eigen::Index q = 0; q < model.logits.cols(); ++q) flat.push_back(model.logits(r, q));
  }
  j["logits"] = flat;
  j["seed"] = cfg.seed;
  j["config"] = {{"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size},
                 {"learning_rate", cfg.learning_rate},
                 {"beta1", cfg.beta1},
                 {"beta2", cfg.beta2},
                 {"epsilon", cfg.epsilon},
                 {"weight_decay", cfg.weight_decay},
                 {"fd_step", cfg.fd_step},
                 {"momentum_interpretation", "beta1 (first-moment decay)"}};
  return j.dump(2);
}

ComboModel combo_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ComboModel m;
    m.mode = parse_combo_mode(j.at("mode").get<std::string>());
    for (const auto& r : j.at("rules")) m.rules.push_back(parse_basic_rule(r.get<std::string>()));
    const int depth = j.at("J").get<int>();
    const auto q = j.at("Q").get<Eigen::Index>();
    m.c = j.at("c").get<double>();
    const auto flat = j.at("logits").get<std::vector<double>>();
    if (depth < 1 || q < 1 || static_cast<Eigen::Index>(flat.size()) != depth * q) {
      throw FormatError("logits do not match J x Q");
    }
    m.logits.resize(depth, q);
    for (Eigen::Index r = 0; r < depth; ++r) {
      for (Eigen::Index c = 0; c < q; ++c) m.logits(r, c) = flat[static_cast<std::size_t>(r * q + c)];
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed combo file: ") + e.what());
  }
}

std::string weight_trajectory_csv(const ComboModel& model) {
  std::ostringstream out;
  out << "iteration_index,rule_name,weight\n";
  const auto names = model.column_names();
  for (int j = 0; j < model.depth(); ++j) {
    const RVector w = model.weights(j);
    for (Eigen::Index q = 0; q < w.size(); ++q) {
      out << (j + 1) << ',' << names[static_cast<std::size_t>(q)] << ',' << format_number(w[q]) << '\n';
    }
  }
  return out.str();
}

}  // namespace sbl
