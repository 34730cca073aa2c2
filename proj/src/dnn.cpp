#include "sbl/dnn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "sbl/error.hpp"
#include "sbl/rng.hpp"
#include "sbl/rule_spec.hpp"

namespace sbl {

using nlohmann::json;

std::string to_string(InputTransform t) { return t == InputTransform::Log1p ? "log1p" : "identity"; }

InputTransform parse_input_transform(const std::string& s) {
  if (s == "log1p") return InputTransform::Log1p;
  if (s == "identity") return InputTransform::Identity;
  throw FormatError("unknown input transform '" + s + "'");
}

std::vector<BasicRule> default_skip_rules() { return {Em{}, Psbl{0.25}, Psbl{0.5}, Psbl{0.75}, Psbl{1.0}}; }

RVector softmax(const RVector& logits) {
  const double mx = logits.maxCoeff();
  RVector e = (logits.array() - mx).exp();
  return e / e.sum();
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_layer(const DenseLayer& l, Eigen::Index out, Eigen::Index in, const char* what) {
  if (l.w.rows() != out || l.w.cols() != in || l.b.size() != out) {
    throw FormatError(std::string(what) + " has shape " + std::to_string(l.w.rows()) + "x" +
                      std::to_string(l.w.cols()) + ", expected " + std::to_string(out) + "x" + std::to_string(in));
  }
  if (!l.w.allFinite() || !l.b.allFinite()) throw NumericError(std::string(what) + " has non-finite weights");
}

RMatrix transformed_inputs(InputTransform transform, const TStats& t, const GammaVec& gamma) {
  RMatrix x(3, gamma.size());
  x.row(0) = t.t1.transpose();
  x.row(1) = t.t2.transpose();
  x.row(2) = gamma.transpose();
  if (transform == InputTransform::Log1p) x = x.array().log1p().matrix();
  return x;
}

}  // namespace

void IterationNet::validate(Eigen::Index d) const {
  if (d < 1) throw FormatError("width must be >= 1");
  check_layer(proj, d, 3, "projection layer");
  for (const auto& h : hidden) check_layer(h, d, d, "hidden layer");
  if (out_w.size() != d) throw FormatError("output layer has wrong width");
  if (!out_w.allFinite() || !std::isfinite(out_b)) throw NumericError("output layer has non-finite weights");
}

void DnnSblModel::validate() const {
  const Eigen::Index d = width();
  for (const auto& it : iterations) it.validate(d);
  if (skip_rules.empty()) throw FormatError("skip connection needs at least one rule");
  if (skip_weights.size() != static_cast<Eigen::Index>(skip_rules.size())) {
    throw FormatError("skip weights do not match skip rules");
  }
  validate_simplex(skip_weights, 1e-6);
  for (const auto& r : skip_rules) {
    if (const auto* p = std::get_if<Psbl>(&r); p && !(p->p > 0.0 && p->p <= 1.0)) {
      throw FormatError("skip rule p outside (0, 1]");
    }
  }
}

double iteration_forward(const IterationNet& net, InputTransform transform, double t1, double t2, double gamma) {
  TStats t{RVector::Constant(1, t1), RVector::Constant(1, t2)};
  return iteration_forward(net, transform, t, GammaVec::Constant(1, gamma))[0];
}

RVector iteration_forward(const IterationNet& net, InputTransform transform, const TStats& t, const GammaVec& gamma) {
  const RMatrix x = transformed_inputs(transform, t, gamma);
  if (!x.allFinite()) throw NumericError("network inputs are not finite");
  const RMatrix z0 = (net.proj.w * x).colwise() + net.proj.b;
  const auto relu = [](const RMatrix& m) -> RMatrix { return m.cwiseMax(0.0); };
  const RMatrix h1 = relu((net.hidden[0].w * z0).colwise() + net.hidden[0].b);
  const RMatrix h2 = relu((net.hidden[1].w * h1).colwise() + net.hidden[1].b + z0);
  const RMatrix h3 = relu((net.hidden[2].w * h2).colwise() + net.hidden[2].b);
  const RMatrix h4 = relu((net.hidden[3].w * h3).colwise() + net.hidden[3].b + h2);
  RVector pre = (net.out_w.transpose() * h4).transpose();
  RVector out(pre.size());
  for (Eigen::Index i = 0; i < pre.size(); ++i) out[i] = softplus(pre[i] + net.out_b);
  return out;
}

GammaVec dnn_update(const DnnSblModel& model, int j, const GammaVec& gamma, const TStats& t) {
  if (j < 0 || j >= model.depth()) {
    throw ConfigError("iteration index " + std::to_string(j) + " outside [0, " + std::to_string(model.depth()) + ")");
  }
  GammaVec out = iteration_forward(model.iterations[static_cast<std::size_t>(j)], model.transform, t, gamma);
  out += convex_update(model.skip_rules, model.skip_weights, gamma, t);
  if (!out.allFinite()) throw NumericError("DNN step produced a non-finite iterate");
  return out;
}

GammaVec dnn_step(const SblProblem& problem, const GammaVec& gamma, const DnnSblModel& model, int j) {
  check_gamma(gamma, problem.m());
  return dnn_update(model, j, gamma, t_stats(problem, gamma));
}

RunTrace dnn_run(const SblProblem& problem, const DnnSblModel& model, const GammaVec& g0, const RunOptions& opts) {
  check_gamma(g0, problem.m());
  RunTrace trace;
  GammaVec gamma = g0;
  Evaluation eval = evaluate(problem, gamma);
  trace.gammas.push_back(gamma);
  trace.nll_values.push_back(eval.nll);
  for (int j = 0; j < model.depth(); ++j) {
    try {
      gamma = dnn_update(model, j, gamma, eval.t);
      eval = evaluate(problem, gamma);
    } catch (const NumericError& e) {
      throw RunAborted(std::string("DNN step ") + std::to_string(j) + ": " + e.what(), trace);
    }
    if (opts.record_gammas) {
      trace.gammas.push_back(gamma);
    } else {
      trace.gammas.back() = gamma;
    }
    trace.nll_values.push_back(eval.nll);
    trace.iterations_used = j + 1;
  }
  trace.converged = true;
  return trace;
}

DnnSblModel zero_model(int depth, Eigen::Index width, InputTransform transform) {
  if (depth < 0 || width < 1) throw ConfigError("depth must be >= 0 and width >= 1");
  DnnSblModel m;
  m.transform = transform;
  m.skip_rules = default_skip_rules();
  const auto q = static_cast<Eigen::Index>(m.skip_rules.size());
  m.skip_logits = RVector::Zero(q);
  m.skip_weights = softmax(*m.skip_logits);
  IterationNet net;
  net.proj = {RMatrix::Zero(width, 3), RVector::Zero(width)};
  for (auto& h : net.hidden) h = {RMatrix::Zero(width, width), RVector::Zero(width)};
  net.out_w = RVector::Zero(width);
  net.out_b = 0.0;
  m.iterations.assign(static_cast<std::size_t>(depth), net);
  return m;
}

DnnSblModel random_model(int depth, Eigen::Index width, std::uint64_t seed, InputTransform transform) {
  DnnSblModel m = zero_model(depth, width, transform);
  Rng rng(seed);
  auto fill = [&](RMatrix& w) {
    const double scale = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * rng.normal();
    }
  };
  for (auto& net : m.iterations) {
    fill(net.proj.w);
    for (auto& h : net.hidden) fill(h.w);
    for (Eigen::Index i = 0; i < width; ++i) net.out_w[i] = rng.normal() / std::sqrt(static_cast<double>(width));
    net.out_b = -2.0;
  }
  return m;
}

namespace {

json row_major(const RMatrix& w) {
  json a = json::array();
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) a.push_back(w(r, c));
  }
  return a;
}

json vec(const RVector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

RMatrix read_matrix(const json& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const auto flat = a.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw FormatError(std::string(what) + ": expected " + std::to_string(rows * cols) + " values, got " +
                      std::to_string(flat.size()));
  }
  RMatrix w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  }
  return w;
}

RVector read_vector(const json& a, Eigen::Index n, const char* what) {
  RMatrix m = read_matrix(a, n, 1, what);
  return m.col(0);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t checksum_of(const json& body) {
  const std::string text = body.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json to_json(const DnnSblModel& model) {
  json j;
  j["schema_version"] = DnnSblModel::kSchemaVersion;
  j["J"] = model.depth();
  j["d"] = model.width();
  j["input_transform"] = to_string(model.transform);
  json rules = json::array();
  for (const auto& r : model.skip_rules) rules.push_back(rule_name(r));
  j["skip_rules"] = rules;
  if (model.skip_logits) {
    j["skip_logits"] = vec(*model.skip_logits);
  } else {
    j["skip_weights"] = vec(model.skip_weights);
  }
  json its = json::array();
  for (const auto& net : model.iterations) {
    json layers = json::array();
    for (const auto& h : net.hidden) layers.push_back({{"w", row_major(h.w)}, {"b", vec(h.b)}});
    its.push_back({{"proj_w", row_major(net.proj.w)},
                   {"proj_b", vec(net.proj.b)},
                   {"layers", layers},
                   {"out_w", vec(net.out_w)},
                   {"out_b", net.out_b}});
  }
  j["iterations"] = its;
  return j;
}

}  // namespace

std::string weights_to_json(const DnnSblModel& model) {
  model.validate();
  json j = to_json(model);
  j["checksum"] = hex64(checksum_of(j));
  return j.dump();
}

DnnSblModel weights_from_json(const std::string& text) {
  DnnSblModel m;
  try {
    json j = json::parse(text);
    if (!j.contains("schema_version")) throw FormatError("weight file lacks schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != DnnSblModel::kSchemaVersion) {
      throw FormatError("weight file schema_version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(DnnSblModel::kSchemaVersion) + ")");
    }
    if (j.contains("checksum")) {
      const std::string stored = j.at("checksum").get<std::string>();
      json body = j;
      body.erase("checksum");
      if (stored != hex64(checksum_of(body))) throw FormatError("weight file checksum mismatch");
    }
    const int depth = j.at("J").get<int>();
    const auto d = j.at("d").get<Eigen::Index>();
    if (depth < 0 || d < 1) throw FormatError("J must be >= 0 and d >= 1");
    m.transform = parse_input_transform(j.at("input_transform").get<std::string>());
    for (const auto& r : j.at("skip_rules")) m.skip_rules.push_back(parse_basic_rule(r.get<std::string>()));
    const auto q = static_cast<Eigen::Index>(m.skip_rules.size());
    if (j.contains("skip_logits")) {
      m.skip_logits = read_vector(j.at("skip_logits"), q, "skip_logits");
      m.skip_weights = softmax(*m.skip_logits);
    } else if (j.contains("skip_weights")) {
      RVector w = read_vector(j.at("skip_weights"), q, "skip_weights");
      if ((w.array() < 0.0).any()) throw FormatError("skip weights must be nonnegative");
      const double dev = std::abs(w.sum() - 1.0);
      if (dev > 1e-6) throw FormatError("skip weights are not on the simplex (sum=" + format_number(w.sum()) + ")");
      if (dev > 1e-9) {
        std::cerr << "warning: renormalizing skip weights (sum=" << format_number(w.sum()) << ")\n";
        w /= w.sum();
      }
      m.skip_weights = w;
    } else {
      throw FormatError("weight file has neither skip_logits nor skip_weights");
    }
    const auto& its = j.at("iterations");
    if (static_cast<int>(its.size()) != depth) {
      throw FormatError("declared J=" + std::to_string(depth) + " but file holds " + std::to_string(its.size()) +
                        " iterations");
    }
    for (const auto& it : its) {
      IterationNet net;
      net.proj.w = read_matrix(it.at("proj_w"), d, 3, "proj_w");
      net.proj.b = read_vector(it.at("proj_b"), d, "proj_b");
      const auto& layers = it.at("layers");
      if (layers.size() != net.hidden.size()) throw FormatError("each iteration needs exactly 4 hidden layers");
      for (std::size_t k = 0; k < net.hidden.size(); ++k) {
        net.hidden[k].w = read_matrix(layers[k].at("w"), d, d, "layer w");
        net.hidden[k].b = read_vector(layers[k].at("b"), d, "layer b");
      }
      net.out_w = read_vector(it.at("out_w"), d, "out_w");
      net.out_b = it.at("out_b").get<double>();
      m.iterations.push_back(std::move(net));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed weight file: ") + e.what());
  } catch (const ConfigError& e) {
    if (dynamic_cast<const FormatError*>(&e)) throw;
    throw FormatError(std::string("malformed weight file: ") + e.what());
  }
  try {
    m.validate();
  } catch (const NumericError& e) {
    throw FormatError(e.what());
  }
  return m;
}

void save_weights(const DnnSblModel& model, const std::string& path) {
  const std::string text = weights_to_json(model);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text << '\n';
  if (!out) throw IoError(path, "write failed");
}

DnnSblModel load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return weights_from_json(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace sbl
