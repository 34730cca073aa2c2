#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sbl/types.hpp"

namespace sbl {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Seedable generator whose output is bit-identical across platforms and
/// standard libraries: mt19937_64 for raw bits, and explicit transforms for
/// uniforms, normals and bounded integers (the std distributions are
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one cached deviate).
  double normal();
  /// Circular complex Gaussian with E|z|^2 = variance.
  cplx complex_normal(double variance);
  /// Uniform integer in [0, n), rejection sampled.
  std::uint64_t below(std::uint64_t n);
  /// k distinct indices from [0, n), sorted ascending.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sbl
