#pragma once

#include <vector>

#include "sbl/types.hpp"

namespace sbl {

/// ||truth - estimate||_F^2 / (M L).
double mse(const CMatrix& estimate, const CMatrix& truth);
/// ||truth - estimate||_F^2.
double mse_frob(const CMatrix& estimate, const CMatrix& truth);

/// Indices of the s largest entries, sorted ascending. Ties go to the
/// lower index.
Support top_s(const GammaVec& gamma, std::size_t s);

/// 1 when top_s(gamma_hat, |support|) equals `support` as a set, else 0.
int psr(const GammaVec& gamma_hat, const Support& support);

/// Pairwise (cascade) summation; the result depends only on the order of
/// `v`, not on how it was produced.
double pairwise_sum(const double* v, std::size_t n);
double pairwise_sum(const std::vector<double>& v);

}  // namespace sbl
