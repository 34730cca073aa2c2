#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbl/updates.hpp"

namespace sbl {

enum class InputTransform { Log1p, Identity };

std::string to_string(InputTransform t);
InputTransform parse_input_transform(const std::string& s);

struct DenseLayer {
  RMatrix w;  // out x in
  RVector b;  // out
};

/// Per-iteration network of the unrolled model. Inputs are (T1, T2, gamma)
/// in that column order. Wiring (schema version 1):
///   z0 = P x + p                     projection, no activation
///   h1 = relu(W1 z0 + b1)
///   h2 = relu(W2 h1 + b2 + z0)       projected input joins layer 2
///   h3 = relu(W3 h2 + b3)
///   h4 = relu(W4 h3 + b4 + h2)       layer-2 output joins layer 4
///   out = softplus(w_o . h4 + b_o)
struct IterationNet {
  DenseLayer proj;                 // d x 3
  std::array<DenseLayer, 4> hidden;  // d x d each
  RVector out_w;                   // d
  double out_b = 0.0;

  Eigen::Index width() const { return proj.w.rows(); }
  void validate(Eigen::Index d) const;
};

struct DnnSblModel {
  static constexpr int kSchemaVersion = 1;

  std::vector<IterationNet> iterations;
  InputTransform transform = InputTransform::Log1p;
  /// Classical rules mixed by the skip connection g(.).
  std::vector<BasicRule> skip_rules;
  /// Simplex weights over `skip_rules`, shared by every iteration.
  RVector skip_weights;
  /// Unconstrained parameters behind `skip_weights`, kept when known so a
  /// save/load round trip is exact.
  std::optional<RVector> skip_logits;

  int depth() const { return static_cast<int>(iterations.size()); }
  Eigen::Index width() const { return iterations.empty() ? 0 : iterations.front().width(); }
  void validate() const;
};

/// EM, p-SBL(0.25), p-SBL(0.5), p-SBL(0.75), p-SBL(1).
std::vector<BasicRule> default_skip_rules();

RVector softmax(const RVector& logits);

/// Scalar forward pass h(t1, t2, gamma); strictly positive unless the
/// softplus argument underflows.
double iteration_forward(const IterationNet& net, InputTransform transform, double t1, double t2, double gamma);

/// Forward pass for every dictionary index at once.
RVector iteration_forward(const IterationNet& net, InputTransform transform, const TStats& t, const GammaVec& gamma);

/// gamma_{j+1}[i] = h_j(T1[i], T2[i], gamma[i]) + g_skip(T1[i], T2[i], gamma[i]).
GammaVec dnn_update(const DnnSblModel& model, int j, const GammaVec& gamma, const TStats& t);
GammaVec dnn_step(const SblProblem& problem, const GammaVec& gamma, const DnnSblModel& model, int j);

/// Exactly J steps, no early stopping.
RunTrace dnn_run(const SblProblem& problem, const DnnSblModel& model, const GammaVec& g0, const RunOptions& opts = {});

/// He-style random initialization with uniform skip weights.
DnnSblModel random_model(int depth, Eigen::Index width, std::uint64_t seed,
                         InputTransform transform = InputTransform::Log1p);

/// Every weight zero and uniform skip logits.
DnnSblModel zero_model(int depth, Eigen::Index width, InputTransform transform = InputTransform::Log1p);

std::string weights_to_json(const DnnSblModel& model);
DnnSblModel weights_from_json(const std::string& text);
void save_weights(const DnnSblModel& model, const std::string& path);
DnnSblModel load_weights(const std::string& path);

}  // namespace sbl
