#include "doctest.h"
#include "oracles.hpp"
#include "sbl/error.hpp"
#include "sbl/model.hpp"

using namespace sbl;

TEST_CASE("covariance at zero gamma is sigma2 I") {
  const SblProblem p = oracle::random_problem(1, 4, 8, 2);
  const Covariance c(p, GammaVec::Zero(8));
  CHECK((c.matrix() - p.sigma2 * CMatrix::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("scalar covariance") {
  const Covariance c(oracle::scalar_s(), oracle::scalar(1.0));
  CHECK(c.matrix()(0, 0).real() == doctest::Approx(1.001).epsilon(1e-15));
}

TEST_CASE("covariance matches entry-by-entry assembly and is Hermitian") {
  const SblProblem p = oracle::random_problem(2, 4, 8, 1);
  const GammaVec g = oracle::random_positive(3, 8);
  const Covariance c(p, g);
  CHECK((c.matrix() - oracle::covariance_loops(p, g)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.matrix() - c.matrix().adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  const CMatrix l = c.lower();
  CHECK((l * l.adjoint() - c.matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nll scalar closed forms") {
  const SblProblem s = oracle::scalar_s();
  const double at_zero = std::log(1e-3) + 4.0 / 1e-3;
  CHECK(nll(s, oracle::scalar(0.0)) == doctest::Approx(at_zero).epsilon(1e-14));
  CHECK(std::abs(at_zero - 3993.0922) < 5e-5);
  const double at_star = std::log(4.0) + 1.0;
  CHECK(nll(s, oracle::scalar(3.999)) == doctest::Approx(at_star).epsilon(1e-14));
  CHECK(std::abs(at_star - 2.3863) < 5e-5);
}

TEST_CASE("nll matches dense inverse for all small sizes") {
  int cases = 0;
  for (Eigen::Index n = 1; n <= 8; ++n) {
    for (Eigen::Index m : {Eigen::Index{1}, n, 2 * n + 1}) {
      for (Eigen::Index l : {1, 3}) {
        const SblProblem p = oracle::random_problem(100 + static_cast<std::uint64_t>(cases), n, m, l);
        const GammaVec g = oracle::random_positive(200 + static_cast<std::uint64_t>(cases), m, 0.0, 5.0);
        CHECK(oracle::rel(nll(p, g), oracle::nll_dense(p, g)) < 1e-9);
        ++cases;
      }
    }
  }
}

TEST_CASE("T statistics") {
  SUBCASE("zero gamma gives 1/sigma2") {
    const SblProblem p = oracle::random_problem(4, 5, 9, 2);
    const TStats t = t_stats(p, GammaVec::Zero(9));
    for (Eigen::Index i = 0; i < 9; ++i) CHECK(t.t2[i] == doctest::Approx(1.0 / p.sigma2).epsilon(1e-12));
  }
  SUBCASE("scalar instance") {
    const TStats t = t_stats(oracle::scalar_s(), oracle::scalar(1.0));
    CHECK(t.t1[0] == doctest::Approx(4.0 / (1.001 * 1.001)).epsilon(1e-14));
    CHECK(t.t2[0] == doctest::Approx(1.0 / 1.001).epsilon(1e-14));
    CHECK(t.t1[0] == doctest::Approx(3.992012).epsilon(1e-6));
    CHECK(t.t2[0] == doctest::Approx(0.999001).epsilon(1e-6));
  }
  SUBCASE("dense-inverse oracle") {
    const SblProblem p = oracle::random_problem(5, 4, 8, 3);
    const GammaVec g = oracle::random_positive(6, 8);
    const TStats t = t_stats(p, g);
    const auto [t1, t2] = oracle::t_dense(p, g);
    for (Eigen::Index i = 0; i < 8; ++i) {
      CHECK(std::abs(t.t1[i] - t1[i]) <= 1e-10 * std::max(1.0, t1[i]));
      CHECK(std::abs(t.t2[i] - t2[i]) <= 1e-10 * std::max(1.0, t2[i]));
    }
  }
  SUBCASE("evaluate agrees with the separate calls") {
    const SblProblem p = oracle::random_problem(7, 6, 10, 2);
    const GammaVec g = oracle::random_positive(8, 10);
    CMatrix mean;
    const Evaluation e = evaluate(p, g, &mean);
    CHECK(e.nll == nll(p, g));
    CHECK((e.t.t1 - t_stats(p, g).t1).norm() == 0.0);
    CHECK((mean - posterior_mean(p, g)).norm() == 0.0);
  }
}

TEST_CASE("T2 gamma <= 1 on random draws") {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 300; ++k) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(k % 7);
    const SblProblem p = oracle::random_problem(1000 + k, n, 3 * n, 1 + k % 3, k % 2 ? 1e-3 : 1.0);
    const GammaVec g = oracle::random_positive(2000 + k, 3 * n, 0.0, 100.0);
    const TStats t = t_stats(p, g);
    worst = std::max(worst, (t.t2.array() * g.array()).maxCoeff());
  }
  CHECK(worst <= 1.0 + 1e-9);
}

TEST_CASE("gradient of nll is T2 - T1") {
  for (std::uint64_t k = 0; k < 10; ++k) {
    const SblProblem p = oracle::random_problem(300 + k, 5, 12, 2, 0.05);
    const GammaVec g = oracle::random_positive(400 + k, 12, 0.2, 2.0);
    const TStats t = t_stats(p, g);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 12; ++i) {
      GammaVec a = g, b = g;
      a[i] += h;
      b[i] -= h;
      const double fd = (nll(p, a) - nll(p, b)) / (2.0 * h);
      CHECK(std::abs(fd - (t.t2[i] - t.t1[i])) <= 1e-4 * std::max(1.0, std::abs(t.t2[i] - t.t1[i])));
    }
  }
}

TEST_CASE("posterior") {
  SUBCASE("zero prior") {
    const SblProblem p = oracle::random_problem(9, 4, 6, 2);
    const Posterior post = posterior(p, GammaVec::Zero(6));
    CHECK(post.mean.norm() == 0.0);
    CHECK(post.err_diag.norm() == 0.0);
  }
  SUBCASE("scalar mean") {
    const Posterior post = posterior(oracle::scalar_s(), oracle::scalar(3.999));
    CHECK(post.mean(0, 0).real() == doctest::Approx(3.999 * 2.0 / 4.0).epsilon(1e-14));
    CHECK(post.mean(0, 0).real() == doctest::Approx(1.9995).epsilon(1e-12));
  }
  SUBCASE("dense moments, error bounds and absorbed zeros") {
    const SblProblem p = oracle::random_problem(10, 5, 10, 3);
    GammaVec g = oracle::random_positive(11, 10);
    g[3] = 0.0;
    g[7] = 0.0;
    const Posterior post = posterior(p, g);
    const CMatrix inv = oracle::covariance_loops(p, g).inverse();
    const CMatrix mean = g.asDiagonal() * p.phi.adjoint() * inv * p.y;
    const CMatrix cov = CMatrix(g.asDiagonal()) - g.asDiagonal() * p.phi.adjoint() * inv * p.phi * g.asDiagonal();
    CHECK((post.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < 10; ++i) {
      CHECK(post.err_diag[i] == doctest::Approx(cov(i, i).real()).epsilon(1e-9));
      CHECK(post.err_diag[i] >= 0.0);
      CHECK(post.err_diag[i] <= g[i]);
    }
    CHECK(post.mean.row(3).norm() == 0.0);
    CHECK(post.mean.row(7).norm() == 0.0);
  }
}

TEST_CASE("MPDR diagnostics") {
  SUBCASE("zero gamma model power is sigma2") {
    const SblProblem p = oracle::random_problem(12, 4, 6, 1);
    const auto [data, model] = mpdr_diagnostics(p, GammaVec::Zero(6));
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(model[i] == doctest::Approx(p.sigma2).epsilon(1e-12));
  }
  SUBCASE("scalar instance") {
    const auto [data, model] = mpdr_diagnostics(oracle::scalar_s(), oracle::scalar(1.0));
    const double t1 = 4.0 / (1.001 * 1.001), t2 = 1.0 / 1.001;
    CHECK(data[0] == doctest::Approx(t1 / (t2 * t2)).epsilon(1e-14));
    CHECK(data[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(model[0] == doctest::Approx(1.001).epsilon(1e-14));
  }
  SUBCASE("stationary point: data and model power agree") {
    const auto [data, model] = mpdr_diagnostics(oracle::scalar_s(), oracle::scalar(3.999));
    CHECK(data[0] == doctest::Approx(model[0]).epsilon(1e-12));
  }
}

TEST_CASE("structured errors") {
  const SblProblem p = oracle::random_problem(13, 3, 5, 1);
  CHECK_THROWS_AS(nll(p, GammaVec::Ones(4)), DimensionError);
  GammaVec bad = GammaVec::Ones(5);
  bad[2] = -1.0;
  CHECK_THROWS_AS(t_stats(p, bad), DomainError);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(t_stats(p, bad), NumericError);
  SblProblem q = p;
  q.sigma2 = 0.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = p;
  q.phi(0, 0) *= 2.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  CHECK_NOTHROW(p.validate());
}
