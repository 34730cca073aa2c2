#include "sbl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "sbl/error.hpp"

namespace sbl {

double mse_frob(const CMatrix& estimate, const CMatrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw DimensionError("estimate is " + std::to_string(estimate.rows()) + "x" + std::to_string(estimate.cols()) +
                         ", truth is " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }
  return (truth - estimate).squaredNorm();
}

double mse(const CMatrix& estimate, const CMatrix& truth) {
  const double f = mse_frob(estimate, truth);
  return f / static_cast<double>(truth.size());
}

Support top_s(const GammaVec& gamma, std::size_t s) {
  const auto m = static_cast<std::size_t>(gamma.size());
  if (s > m) throw ConfigError("cannot pick " + std::to_string(s) + " of " + std::to_string(m) + " entries");
  Support idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    const double ga = gamma[static_cast<Eigen::Index>(a)];
    const double gb = gamma[static_cast<Eigen::Index>(b)];
    return ga != gb ? ga > gb : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s), idx.end(), better);
  idx.resize(s);
  std::sort(idx.begin(), idx.end());
  return idx;
}

int psr(const GammaVec& gamma_hat, const Support& support) {
  Support truth = support;
  std::sort(truth.begin(), truth.end());
  return top_s(gamma_hat, truth.size()) == truth ? 1 : 0;
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += v[i];
    return acc;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace sbl
