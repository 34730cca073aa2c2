#include <limits>

#include "doctest.h"
#include "sbl/error.hpp"
#include "oracles.hpp"
#include "sbl/majorizers.hpp"
#include "sbl/updates.hpp"

using namespace sbl;

TEST_CASE("EM majorizer gap") {
  const SblProblem s = oracle::scalar_s();
  CHECK(g_em_gap(s, oracle::scalar(1.0), oracle::scalar(1.0)) == 0.0);

  // Hand evaluation at anchor 1, gamma 2: log(2) + m (1/2 - 1), with the
  // posterior second moment m = |1 * 2 / 1.001|^2 + (1 - 1/1.001).
  const double mean = 2.0 / 1.001;
  const double m = mean * mean + (1.0 - 1.0 / 1.001);
  CHECK(g_em_gap(s, oracle::scalar(2.0), oracle::scalar(1.0)) == doctest::Approx(std::log(2.0) - 0.5 * m).epsilon(1e-13));

  const SblProblem p = oracle::random_problem(41, 6, 14, 2);
  const GammaVec a = oracle::random_positive(42, 14);
  CHECK(g_em_gap(p, em_step(p, a), a) <= 0.0);
  CHECK(g_em_gap(p, a, a) == 0.0);
}

TEST_CASE("p-SBL majorizer gap") {
  const SblProblem s = oracle::scalar_s();
  CHECK(g_psbl_gap(s, oracle::scalar(1.0), oracle::scalar(1.0)) == 0.0);

  const SblProblem p = oracle::random_problem(43, 6, 14, 2);
  const GammaVec a = oracle::random_positive(44, 14);
  CHECK(std::abs(g_psbl_gap(p, psbl_step(p, a, 1.0), a)) < 1e-10);

  // p = 1/2 minimizes the scalar majorizer.
  const double t1 = 4.0 / (1.001 * 1.001), t2 = 1.0 / 1.001;
  const auto gap = [&](double x) { return (x - 1.0) * t2 + t1 * (1.0 / x - 1.0); };
  const double xmin = oracle::golden_section(gap, 1e-3, 50.0);
  const double half = psbl_step(s, oracle::scalar(1.0), 0.5)[0];
  CHECK(half == doctest::Approx(xmin).epsilon(1e-6));
  for (double x : {0.5, 1.0, 1.5, 1.99, 2.01, 3.0, 4.0, 10.0}) {
    CHECK(g_psbl_gap(s, oracle::scalar(half), oracle::scalar(1.0)) <= g_psbl_gap(s, oracle::scalar(x), oracle::scalar(1.0)));
  }
}

TEST_CASE("combined majorizer gap") {
  const SblProblem p = oracle::random_problem(45, 5, 12, 3);
  const GammaVec a = oracle::random_positive(46, 12);
  const GammaVec g = oracle::random_positive(47, 12);
  CHECK(combined_majorizer_gap(p, g, a, 1.0) == doctest::Approx(g_em_gap(p, g, a)).epsilon(1e-14));
  CHECK(combined_majorizer_gap(p, g, a, 0.0) == doctest::Approx(g_psbl_gap(p, g, a)).epsilon(1e-14));
  for (double alpha : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    CHECK(combined_majorizer_gap(p, convex_majorizer_step(p, a, alpha), a, alpha) <= 1e-12);
  }
  CHECK_THROWS_AS(combined_majorizer_gap(p, g, a, -0.1), ConfigError);
}

TEST_CASE("majorizers bound the nll change on random pairs") {
  for (std::uint64_t k = 0; k < 200; ++k) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(k % 6);
    const SblProblem p = oracle::random_problem(500 + k, n, 2 * n + 1, 1 + k % 3, 1e-3);
    const GammaVec a = oracle::random_positive(600 + k, 2 * n + 1, 1e-3, 10.0);
    const GammaVec g = oracle::random_positive(700 + k, 2 * n + 1, 1e-3, 10.0);
    const double df = oracle::nll_dense(p, g) - oracle::nll_dense(p, a);
    CHECK(g_em_gap(p, g, a) >= df - 1e-8);
    CHECK(g_psbl_gap(p, g, a) >= df - 1e-8);
    CHECK(combined_majorizer_gap(p, g, a, 0.37) >= df - 1e-8);
  }
}

TEST_CASE("zero-entry conventions") {
  const SblProblem p = oracle::random_problem(48, 4, 6, 1);
  GammaVec a = oracle::random_positive(49, 6);
  GammaVec g = a;
  g[2] = 0.0;
  CHECK(g_psbl_gap(p, g, a) == std::numeric_limits<double>::infinity());
  CHECK(g_em_gap(p, g, a) == std::numeric_limits<double>::infinity());
  a[2] = 0.0;
  g[2] = 0.5;
  const TStats t = t_stats(p, a);
  GammaVec g0 = g;
  g0[2] = 0.0;
  CHECK(g_psbl_gap(p, g, a) == doctest::Approx(g_psbl_gap(p, g0, a) + 0.5 * t.t2[2]).epsilon(1e-12));
  g[2] = -1.0;
  CHECK_THROWS_AS(g_psbl_gap(p, g, a), DomainError);
}

TEST_CASE("EM step on the p-SBL majorizer") {
  const SblProblem s = oracle::scalar_s();
  SUBCASE("zero anchor") {
    const DeltaCheck d = em_on_psbl_delta(s, oracle::scalar(0.0));
    CHECK(d.delta == 0.0);
  }
  SUBCASE("stationary anchor") {
    const DeltaCheck d = em_on_psbl_delta(s, oracle::scalar(3.999));
    CHECK(std::abs(d.delta) < 1e-20);
  }
  SUBCASE("scalar anchor 1") {
    const DeltaCheck d = em_on_psbl_delta(s, oracle::scalar(1.0));
    const double t1 = 4.0 / (1.001 * 1.001), t2 = 1.0 / 1.001;
    const double em = (t1 - t2) + 1.0;
    const double direct = (em - 1.0) * t2 + t1 * (1.0 / em - 1.0);
    CHECK(d.delta < 0.0);
    CHECK(d.delta == doctest::Approx(direct).epsilon(1e-12));
    CHECK(d.direct == doctest::Approx(direct).epsilon(1e-12));
    CHECK(d.agree);
  }
  SUBCASE("random anchors") {
    for (std::uint64_t k = 0; k < 100; ++k) {
      const SblProblem p = oracle::random_problem(800 + k, 5, 12, 2, 1e-3);
      const DeltaCheck d = em_on_psbl_delta(p, oracle::random_positive(900 + k, 12, 1e-3, 10.0));
      CHECK(d.direct <= 1e-9);
      CHECK(std::abs(d.delta - d.direct) <= 1e-8 * std::max(1.0, std::abs(d.direct)));
    }
  }
}

TEST_CASE("strict Hessian check") {
  const SblProblem s = oracle::scalar_s();
  const double t2 = 1.0 / 1.001;
  CHECK(strict_hessian_check(s, oracle::scalar(1.0), RVector::Ones(1)) == doctest::Approx(t2 * t2).epsilon(1e-14));
  CHECK(t2 * t2 == doctest::Approx(0.998004).epsilon(1e-6));

  const SblProblem p = oracle::random_problem(50, 4, 9, 2);
  const GammaVec g = oracle::random_positive(51, 9);
  const RVector v = oracle::random_positive(52, 9, 0.01, 1.0);
  const CMatrix inv = oracle::covariance_loops(p, g).inverse();
  const CMatrix G = p.phi.adjoint() * inv * p.phi;
  double dense = 0.0;
  for (Eigen::Index i = 0; i < 9; ++i) {
    for (Eigen::Index j = 0; j < 9; ++j) dense += v[i] * (G(i, j) * std::conj(G(i, j))).real() * v[j];
  }
  const double h = strict_hessian_check(p, g, v);
  CHECK(h > 0.0);
  CHECK(std::abs(h - dense) <= 1e-10 * std::max(1.0, dense));
  RVector bad = v;
  bad[0] = 0.0;
  CHECK_THROWS_AS(strict_hessian_check(p, g, bad), ConfigError);
}
