#include "sbl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "json.hpp"
#include "sbl/error.hpp"
#include "sbl/rng.hpp"

namespace sbl {

using nlohmann::json;

std::string to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::GaussianComplex: return "gaussian";
    case MatrixKind::Ula: return "ula";
    case MatrixKind::Correlated: return "correlated";
  }
  return "?";
}

MatrixKind parse_matrix_kind(const std::string& s) {
  if (s == "gaussian" || s == "random" || s == "gaussian_complex") return MatrixKind::GaussianComplex;
  if (s == "ula" || s == "array") return MatrixKind::Ula;
  if (s == "correlated") return MatrixKind::Correlated;
  throw ConfigError("unknown matrix kind '" + s + "'");
}

void MatrixSpec::validate() const {
  if (n < 1 || m < 1) throw ConfigError("matrix dimensions must be >= 1");
  if (kind != MatrixKind::Ula) return;
  if (!(beta_start >= 0.0 && beta_end <= 180.0 && beta_start <= beta_end)) {
    throw ConfigError("ULA angle range must lie inside [0, 180] degrees");
  }
  if (sampled_angles || grid_step <= 0.0) {
    if (m > 1 && beta_start == beta_end && !sampled_angles) throw ConfigError("ULA grid is degenerate");
    return;
  }
  const double points = (beta_end - beta_start) / grid_step + 1.0;
  if (std::abs(points - static_cast<double>(m)) > 1e-9 * points) {
    throw ConfigError("ULA grid [" + std::to_string(beta_start) + ", " + std::to_string(beta_end) + "] with step " +
                      std::to_string(grid_step) + " does not have m=" + std::to_string(m) + " points");
  }
}

RVector ula_angles(const MatrixSpec& spec) {
  spec.validate();
  RVector a(spec.m);
  if (spec.sampled_angles) {
    Rng rng(spec.seed);
    for (Eigen::Index i = 0; i < spec.m; ++i) a[i] = rng.uniform(spec.beta_start, spec.beta_end);
    std::sort(a.begin(), a.end());
    return a;
  }
  const double step = spec.grid_step > 0.0 ? spec.grid_step
                      : spec.m > 1         ? (spec.beta_end - spec.beta_start) / static_cast<double>(spec.m - 1)
                                           : 0.0;
  for (Eigen::Index i = 0; i < spec.m; ++i) a[i] = spec.beta_start + step * static_cast<double>(i);
  return a;
}

CMatrix ula_matrix(Eigen::Index n, const RVector& angles_deg) {
  CMatrix phi(n, angles_deg.size());
  for (Eigen::Index i = 0; i < angles_deg.size(); ++i) {
    const double u = std::numbers::pi * std::cos(angles_deg[i] * std::numbers::pi / 180.0);
    for (Eigen::Index k = 0; k < n; ++k) phi(k, i) = std::polar(1.0, u * static_cast<double>(k));
  }
  normalize_columns(phi);
  return phi;
}

void normalize_columns(CMatrix& phi) {
  for (Eigen::Index i = 0; i < phi.cols(); ++i) {
    const double nrm = phi.col(i).norm();
    if (!(nrm > 0.0)) throw NumericError("sensing matrix has a zero column");
    phi.col(i) /= nrm;
  }
}

CMatrix make_matrix(const MatrixSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case MatrixKind::Ula:
      return ula_matrix(spec.n, ula_angles(spec));
    case MatrixKind::GaussianComplex: {
      Rng rng(spec.seed);
      CMatrix phi(spec.n, spec.m);
      for (Eigen::Index c = 0; c < spec.m; ++c) {
        for (Eigen::Index r = 0; r < spec.n; ++r) {
          const double re = rng.normal();
          const double im = rng.normal();
          phi(r, c) = cplx(re, im);
        }
      }
      normalize_columns(phi);
      return phi;
    }
    case MatrixKind::Correlated: {
      // sum_{i=1}^{N} (1/i^2) u_i v_i^T with fresh uniform u_i, v_i per term.
      Rng rng(spec.seed);
      RMatrix acc = RMatrix::Zero(spec.n, spec.m);
      RVector u(spec.n);
      RVector v(spec.m);
      for (Eigen::Index i = 1; i <= spec.n; ++i) {
        for (Eigen::Index k = 0; k < spec.n; ++k) u[k] = rng.uniform();
        for (Eigen::Index k = 0; k < spec.m; ++k) v[k] = rng.uniform();
        acc.noalias() += (1.0 / static_cast<double>(i * i)) * u * v.transpose();
      }
      CMatrix phi = acc.cast<cplx>();
      normalize_columns(phi);
      return phi;
    }
  }
  throw ConfigError("unknown matrix kind");
}

void SignalSpec::validate(Eigen::Index n, Eigen::Index m) const {
  const long cap = static_cast<long>(n / 2);
  if (sparsity < 1 || sparsity > cap) {
    throw ConfigError("sparsity " + std::to_string(sparsity) + " outside [1, floor(N/2)=" + std::to_string(cap) + "]");
  }
  if (sparsity > m) throw ConfigError("sparsity exceeds the number of columns");
  if (snapshots < 1) throw ConfigError("need at least one snapshot");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
}

double signal_variance(double sigma2, double snr_db) { return sigma2 * std::pow(10.0, snr_db / 10.0); }

Instance make_instance(const CMatrix& phi, const SignalSpec& sig) {
  sig.validate(phi.rows(), phi.cols());
  Rng rng(sig.seed);
  Instance inst;
  inst.support = rng.sample_without_replacement(static_cast<std::size_t>(phi.cols()),
                                                static_cast<std::size_t>(sig.sparsity));
  const double var_s = signal_variance(sig.sigma2, sig.snr_db);
  inst.x = CMatrix::Zero(phi.cols(), sig.snapshots);
  for (Eigen::Index l = 0; l < sig.snapshots; ++l) {
    for (std::size_t idx : inst.support) inst.x(static_cast<Eigen::Index>(idx), l) = rng.complex_normal(var_s);
  }
  CMatrix noise(phi.rows(), sig.snapshots);
  for (Eigen::Index l = 0; l < sig.snapshots; ++l) {
    for (Eigen::Index r = 0; r < phi.rows(); ++r) noise(r, l) = rng.complex_normal(sig.sigma2);
  }
  inst.problem.phi = phi;
  inst.problem.y = phi * inst.x + noise;
  inst.problem.sigma2 = sig.sigma2;
  return inst;
}

void DatasetConfig::validate() const {
  matrix.validate();
  if (sweep.sparsity.empty() || sweep.snr_db.empty() || sweep.snapshots.empty()) {
    throw ConfigError("sweep lists must be non-empty");
  }
  if (sweep.count_per_cell < 1) throw ConfigError("count_per_cell must be >= 1");
  for (int s : sweep.sparsity) {
    for (int l : sweep.snapshots) SignalSpec{s, sweep.snr_db.front(), sigma2, l, 0}.validate(matrix.n, matrix.m);
  }
  for (double snr : sweep.snr_db) {
    if (!std::isfinite(snr)) throw ConfigError("snr_db must be finite");
  }
}

std::size_t DatasetConfig::cell_count() const {
  return sweep.sparsity.size() * sweep.snr_db.size() * sweep.snapshots.size();
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

DatasetConfig parse_dataset_config(const std::string& json_text) {
  DatasetConfig cfg;
  try {
    const json j = json::parse(json_text);
    const json& mj = j.at("matrix");
    cfg.matrix.kind = parse_matrix_kind(mj.at("kind").get<std::string>());
    cfg.matrix.n = mj.at("n").get<Eigen::Index>();
    cfg.matrix.m = mj.at("m").get<Eigen::Index>();
    cfg.matrix.seed = get_or<std::uint64_t>(mj, "seed", 0);
    cfg.matrix.beta_start = get_or<double>(mj, "beta_start", 0.0);
    cfg.matrix.beta_end = get_or<double>(mj, "beta_end", 180.0);
    cfg.matrix.grid_step = get_or<double>(mj, "grid_step", 0.0);
    cfg.matrix.sampled_angles = get_or<bool>(mj, "sampled_angles", false);
    const json& sj = j.at("sweep");
    cfg.sweep.sparsity = sj.at("sparsity").get<std::vector<int>>();
    cfg.sweep.snr_db = sj.at("snr_db").get<std::vector<double>>();
    cfg.sweep.snapshots = sj.at("snapshots").get<std::vector<int>>();
    cfg.sweep.count_per_cell = get_or<int>(sj, "count_per_cell", 1);
    cfg.sigma2 = get_or<double>(j, "sigma2", 1e-3);
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string dataset_config_to_json(const DatasetConfig& cfg) {
  json mj = {{"kind", to_string(cfg.matrix.kind)},
             {"n", cfg.matrix.n},
             {"m", cfg.matrix.m},
             {"seed", cfg.matrix.seed}};
  if (cfg.matrix.kind == MatrixKind::Ula) {
    mj["beta_start"] = cfg.matrix.beta_start;
    mj["beta_end"] = cfg.matrix.beta_end;
    mj["grid_step"] = cfg.matrix.grid_step;
    mj["sampled_angles"] = cfg.matrix.sampled_angles;
  }
  json j = {{"matrix", mj},
            {"sweep",
             {{"sparsity", cfg.sweep.sparsity},
              {"snr_db", cfg.sweep.snr_db},
              {"snapshots", cfg.sweep.snapshots},
              {"count_per_cell", cfg.sweep.count_per_cell}}},
            {"sigma2", cfg.sigma2},
            {"seed", cfg.seed}};
  return j.dump();
}

SblProblem Dataset::problem(std::size_t k) const {
  const DatasetEntry& e = entries.at(k);
  return SblProblem{matrices.at(e.matrix_index), e.y, config.sigma2};
}

void Dataset::validate() const {
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const DatasetEntry& e = entries[k];
    const std::string where = "instance " + std::to_string(k) + ": ";
    if (e.matrix_index >= matrices.size()) throw FormatError(where + "matrix index out of range");
    const CMatrix& phi = matrices[e.matrix_index];
    if (e.y.rows() != phi.rows() || e.x.rows() != phi.cols() || e.x.cols() != e.y.cols()) {
      throw FormatError(where + "array shapes are inconsistent");
    }
    if (e.support.size() != static_cast<std::size_t>(e.sparsity)) throw FormatError(where + "support size != s");
    std::vector<bool> in(static_cast<std::size_t>(phi.cols()), false);
    for (std::size_t idx : e.support) {
      if (idx >= in.size()) throw FormatError(where + "support index out of range");
      in[idx] = true;
    }
    for (Eigen::Index r = 0; r < e.x.rows(); ++r) {
      if (!in[static_cast<std::size_t>(r)] && e.x.row(r).squaredNorm() != 0.0) {
        throw FormatError(where + "nonzero row outside the support");
      }
    }
  }
}

Dataset make_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  const bool per_instance_matrix = cfg.matrix.kind == MatrixKind::GaussianComplex;
  if (!per_instance_matrix) ds.matrices.push_back(make_matrix(cfg.matrix));

  std::size_t cell = 0;
  for (int s : cfg.sweep.sparsity) {
    for (double snr : cfg.sweep.snr_db) {
      for (int l : cfg.sweep.snapshots) {
        for (int k = 0; k < cfg.sweep.count_per_cell; ++k) {
          const auto kk = static_cast<std::uint64_t>(k);
          DatasetEntry e;
          if (per_instance_matrix) {
            MatrixSpec ms = cfg.matrix;
            ms.seed = derive_seed(mix_seed(cfg.seed) ^ cfg.matrix.seed, cell, kk, 1);
            ds.matrices.push_back(make_matrix(ms));
            e.matrix_index = ds.matrices.size() - 1;
          }
          e.seed = derive_seed(cfg.seed, cell, kk);
          Instance inst = make_instance(ds.matrices[e.matrix_index], SignalSpec{s, snr, cfg.sigma2, l, e.seed});
          e.y = std::move(inst.problem.y);
          e.x = std::move(inst.x);
          e.support = std::move(inst.support);
          e.sparsity = s;
          e.snr_db = snr;
          e.cell = cell;
          ds.entries.push_back(std::move(e));
        }
        ++cell;
      }
    }
  }
  return ds;
}

}  // namespace sbl
