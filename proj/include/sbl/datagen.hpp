#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbl/types.hpp"

namespace sbl {

enum class MatrixKind { GaussianComplex, Ula, Correlated };

std::string to_string(MatrixKind k);
MatrixKind parse_matrix_kind(const std::string& s);

struct MatrixSpec {
  MatrixKind kind = MatrixKind::Ula;
  Eigen::Index n = 1;
  Eigen::Index m = 1;
  std::uint64_t seed = 0;
  // ULA only, degrees. grid_step <= 0 means "spread m points evenly".
  double beta_start = 0.0;
  double beta_end = 180.0;
  double grid_step = 0.0;
  bool sampled_angles = false;  // i.i.d. uniform angles instead of a grid

  void validate() const;
};

/// Steering angles (degrees) of the ULA dictionary, ascending.
RVector ula_angles(const MatrixSpec& spec);
/// Columns [1, e^{j pi cos b}, ..., e^{j pi (N-1) cos b}] / sqrt(N).
CMatrix ula_matrix(Eigen::Index n, const RVector& angles_deg);
void normalize_columns(CMatrix& phi);

/// Sensing matrix with unit-norm columns; deterministic in `spec.seed`.
CMatrix make_matrix(const MatrixSpec& spec);

struct SignalSpec {
  int sparsity = 1;
  double snr_db = 30.0;
  double sigma2 = 1e-3;
  int snapshots = 1;
  std::uint64_t seed = 0;

  void validate(Eigen::Index n, Eigen::Index m) const;
};

/// Per-entry signal variance sigma2 * 10^(snr_db / 10).
double signal_variance(double sigma2, double snr_db);

inline constexpr const char* kSnrConvention = "per-entry signal variance = sigma2 * 10^(snr_db/10)";

struct Instance {
  SblProblem problem;
  CMatrix x;        // M x L ground truth
  Support support;  // sorted
};

Instance make_instance(const CMatrix& phi, const SignalSpec& sig);

struct SweepSpec {
  std::vector<int> sparsity;
  std::vector<double> snr_db;
  std::vector<int> snapshots;
  int count_per_cell = 1;
};

struct DatasetConfig {
  MatrixSpec matrix;
  SweepSpec sweep;
  double sigma2 = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t cell_count() const;
};

DatasetConfig parse_dataset_config(const std::string& json_text);
std::string dataset_config_to_json(const DatasetConfig& cfg);

struct DatasetEntry {
  std::size_t matrix_index = 0;
  CMatrix y;
  CMatrix x;
  Support support;
  int sparsity = 0;
  double snr_db = 0.0;
  std::size_t cell = 0;
  std::uint64_t seed = 0;

  int snapshots() const { return static_cast<int>(y.cols()); }
};

/// Gaussian datasets carry one matrix per instance; ULA and correlated
/// datasets share a single matrix.
struct Dataset {
  DatasetConfig config;
  std::vector<CMatrix> matrices;
  std::vector<DatasetEntry> entries;

  std::size_t size() const { return entries.size(); }
  SblProblem problem(std::size_t k) const;
  /// Throws FormatError when an entry violates the dataset invariants.
  void validate() const;
};

/// Cartesian sweep sparsity x snr x snapshots, `count_per_cell` instances
/// each, in that nesting order. Every instance is a pure function of
/// (config.seed, cell, index within cell).
Dataset make_dataset(const DatasetConfig& cfg);

}  // namespace sbl
