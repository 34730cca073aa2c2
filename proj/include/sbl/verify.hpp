#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbl/datagen.hpp"
#include "sbl/rng.hpp"

namespace sbl {

/// Bounds for random property-test instances (Gaussian dictionaries).
struct RandomInstanceSpec {
  Eigen::Index max_n = 16;
  Eigen::Index max_m = 48;
  int max_snapshots = 4;
  std::vector<double> snr_db{20.0, 40.0};
  double sigma2 = 1e-3;
};

Instance random_instance(std::uint64_t seed, const RandomInstanceSpec& spec = {});

/// Positive gamma with log-uniform entries in [1e-4, 1e2].
GammaVec random_gamma(Rng& rng, Eigen::Index m);

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::string detail;  // worst observed value
};

struct VerifyConfig {
  std::uint64_t seed = 1;
  int instances = 100;   // descent runs
  int draws = 1000;      // pointwise draws
  int max_iters = 60;    // per descent run
  unsigned jobs = 1;
};

std::vector<PropertyResult> run_property_suite(const VerifyConfig& cfg);

}  // namespace sbl
