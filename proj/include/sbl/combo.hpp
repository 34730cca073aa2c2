#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbl/datagen.hpp"
#include "sbl/updates.hpp"

namespace sbl {

enum class ComboMode { Rules, Majorizers };

std::string to_string(ComboMode m);
ComboMode parse_combo_mode(const std::string& s);

/// Per-iteration convex weights behind a softmax. In Rules mode row j
/// mixes `rules`; in Majorizers mode row j is (weight of g_EM, weight of
/// g_pSBL), so alpha1 = softmax(row j)[0].
struct ComboModel {
  ComboMode mode = ComboMode::Rules;
  std::vector<BasicRule> rules;
  RMatrix logits;  // J x Q
  double c = 0.95;

  int depth() const { return static_cast<int>(logits.rows()); }
  Eigen::Index width() const { return logits.cols(); }
  RVector weights(int j) const;
  std::vector<std::string> column_names() const;
  /// Equivalent classical schedule (ConvexUpdates or ConvexMajorizers).
  UpdateRuleSpec as_rule() const;
  void validate() const;
};

/// Zero logits: uniform weights at every iteration.
ComboModel make_combo(ComboMode mode, std::vector<BasicRule> rules, int depth, double c = 0.95);

/// gamma_{j+1} from gamma_j with the weights of row j.
GammaVec combo_update(const ComboModel& model, int j, const GammaVec& gamma, const TStats& t);

/// sum_{j=1..J} c^{J-j} ||X* - Xhat(gamma_j)||_F^2, gamma_0 = 1.
double unrolled_loss(const ComboModel& model, const SblProblem& problem, const CMatrix& x_true);

/// Same loss for one fixed rule run for J steps.
double unrolled_loss(const BasicRule& rule, int depth, double c, const SblProblem& problem, const CMatrix& x_true);

/// Mean unrolled loss over a dataset.
double mean_loss(const ComboModel& model, const Dataset& ds, unsigned jobs = 1);
double mean_loss(const BasicRule& rule, int depth, double c, const Dataset& ds, unsigned jobs = 1);

struct ComboTrainConfig {
  int epochs = 50;
  std::size_t batch_size = 256;
  double learning_rate = 4e-4;
  double beta1 = 0.99;  // the reported "momentum"
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-6;
  double fd_step = 1e-4;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const;
};

struct ComboHistory {
  std::vector<double> train_loss;      // per epoch, mean over minibatches
  std::vector<double> val_loss;        // per epoch, after the epoch's updates
  std::vector<RMatrix> weights;        // per epoch, J x Q simplex rows
};

struct ComboTrainResult {
  ComboModel model;
  ComboHistory history;
};

class ComboDiverged : public NumericError {
 public:
  ComboDiverged(const std::string& what, ComboHistory h) : NumericError(what), history_(std::move(h)) {}
  const ComboHistory& history() const noexcept { return history_; }

 private:
  ComboHistory history_;
};

/// Central finite-difference gradient of the mean unrolled loss over
/// `indices` with respect to every logit. With `central` false a forward
/// difference is used instead.
RMatrix loss_gradient(const ComboModel& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                      double step, bool central = true, unsigned jobs = 1);

/// Adam with decoupled weight decay on minibatches of `train`.
ComboTrainResult train_combo(const ComboModel& init, const Dataset& train, const Dataset& val,
                             const ComboTrainConfig& cfg);

/// {mode, rules, J, c, logits (row-major), seed, config}
std::string combo_to_json(const ComboModel& model, const ComboTrainConfig& cfg);
ComboModel combo_from_json(const std::string& text);

/// Columns iteration_index, rule_name, weight; iteration_index starts at 1.
std::string weight_trajectory_csv(const ComboModel& model);

}  // namespace sbl
