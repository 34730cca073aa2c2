#include "doctest.h"
#include "sbl/error.hpp"
#include "sbl/bench.hpp"
#include "sbl/metrics.hpp"

using namespace sbl;

namespace {

Dataset small(int count, std::vector<int> sparsity = {1, 2}) {
  DatasetConfig cfg;
  cfg.matrix.kind = MatrixKind::GaussianComplex;
  cfg.matrix.n = 8;
  cfg.matrix.m = 20;
  cfg.sweep.sparsity = std::move(sparsity);
  cfg.sweep.snr_db = {30.0};
  cfg.sweep.snapshots = {2};
  cfg.sweep.count_per_cell = count;
  cfg.seed = 3;
  return make_dataset(cfg);
}

}  // namespace

TEST_CASE("one instance, one rule gives one row") {
  const Dataset ds = small(1, {2});
  BenchConfig cfg;
  cfg.rules = {Psbl{0.5}};
  const auto rows = bench(ds, cfg);
  REQUIRE(rows.size() == 1);
  const InstanceResult r = evaluate_instance(ds.problem(0), ds.entries[0].x, ds.entries[0].support, Psbl{0.5}, cfg.stop);
  CHECK(rows[0].mean_mse == r.mse);
  CHECK(rows[0].psr == r.psr);
  CHECK(rows[0].mean_iters == r.iterations);
  CHECK(rows[0].n_trials == 1);
  CHECK(rows[0].p_or_alpha == "0.5");
  const std::string csv = bench_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind(kBenchCsvHeader, 0) == 0);
}

TEST_CASE("rows per rule and cell, deterministic across job counts") {
  const Dataset ds = small(5);
  BenchConfig cfg;
  cfg.rules = {Em{}, Mu{}, ConvexMajorizers{{0.5}}};
  cfg.stop.max_iters = 100;
  const auto a = bench(ds, cfg);
  CHECK(a.size() == 6);
  CHECK(a[0].rule == "em");
  CHECK(a[1].s == 2);
  CHECK(a[2].rule == "mu");
  CHECK(a[4].p_or_alpha == "0.5");
  cfg.jobs = 3;
  const auto b = bench(ds, cfg);
  CHECK(bench_csv(a) == bench_csv(b));
}

TEST_CASE("failed instances are counted and excluded") {
  Dataset ds = small(3, {1});
  ds.entries[1].y(0, 0) = cplx(1e200, 0.0);
  BenchConfig cfg;
  cfg.rules = {Em{}};
  const auto rows = bench(ds, cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_fail == 1);
  CHECK(rows[0].n_trials == 3);
  double expect = 0.0;
  for (std::size_t k : {std::size_t{0}, std::size_t{2}}) {
    expect += evaluate_instance(ds.problem(k), ds.entries[k].x, ds.entries[k].support, Em{}, cfg.stop).mse;
  }
  CHECK(rows[0].mean_mse == doctest::Approx(expect / 2.0).epsilon(1e-15));
}

TEST_CASE("csv helpers") {
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("x\"y") == "\"x\"\"y\"");
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_number(std::nan("")) == "nan");
  CHECK(csv_number(0.1) == "0.1");
}
