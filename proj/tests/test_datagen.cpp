#include <cstdio>
#include <filesystem>
#include <fstream>

#include <algorithm>
#include <numbers>

#include "doctest.h"
#include "sbl/error.hpp"
#include "oracles.hpp"
#include "sbl/dataset_io.hpp"
#include "sbl/datagen.hpp"
#include "sbl/rng.hpp"

using namespace sbl;

namespace {

DatasetConfig small_config(MatrixKind kind) {
  DatasetConfig cfg;
  cfg.matrix.kind = kind;
  cfg.matrix.n = 8;
  cfg.matrix.m = 20;
  cfg.matrix.seed = 5;
  cfg.sweep.sparsity = {1, 2};
  cfg.sweep.snr_db = {30.0};
  cfg.sweep.snapshots = {1, 5};
  cfg.sweep.count_per_cell = 10;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST_CASE("ULA dictionary") {
  const CMatrix phi = ula_matrix(6, RVector::Constant(1, 90.0));
  for (Eigen::Index k = 0; k < 6; ++k) {
    CHECK(std::abs(phi(k, 0) - cplx(1.0 / std::sqrt(6.0), 0.0)) < 1e-15);
  }
  MatrixSpec ms;
  ms.kind = MatrixKind::Ula;
  ms.n = 30;
  ms.m = 120;
  ms.beta_start = 31.0;
  ms.beta_end = 150.0;
  ms.grid_step = 1.0;
  const RVector a = ula_angles(ms);
  CHECK(a[0] == 31.0);
  CHECK(a[119] == 150.0);
  const CMatrix u = make_matrix(ms);
  const double angle = std::cos(40.0 * std::numbers::pi / 180.0) * std::numbers::pi;
  CHECK(std::abs(u(3, 9) - std::polar(1.0, 3.0 * angle) / std::sqrt(30.0)) < 1e-14);
  ms.m = 119;
  CHECK_THROWS_AS(make_matrix(ms), ConfigError);
  ms.m = 120;
  ms.beta_end = 190.0;
  CHECK_THROWS_AS(make_matrix(ms), ConfigError);
  ms.beta_end = 150.0;
  ms.grid_step = 0.0;
  ms.sampled_angles = true;
  const RVector s = ula_angles(ms);
  CHECK(s.minCoeff() >= 31.0);
  CHECK(s.maxCoeff() <= 150.0);
  CHECK(std::is_sorted(s.begin(), s.end()));
}

TEST_CASE("every matrix kind has unit columns and is seed deterministic") {
  for (MatrixKind kind : {MatrixKind::GaussianComplex, MatrixKind::Ula, MatrixKind::Correlated}) {
    MatrixSpec ms;
    ms.kind = kind;
    ms.n = 7;
    ms.m = 19;
    ms.seed = 3;
    ms.sampled_angles = true;
    const CMatrix a = make_matrix(ms);
    for (Eigen::Index i = 0; i < a.cols(); ++i) CHECK(std::abs(a.col(i).norm() - 1.0) < 1e-12);
    CHECK((make_matrix(ms) - a).norm() == 0.0);
    ms.seed = 4;
    CHECK((make_matrix(ms) - a).norm() > 0.0);
  }
}

TEST_CASE("correlated matrix rank is at most N") {
  MatrixSpec ms;
  ms.kind = MatrixKind::Correlated;
  ms.n = 6;
  ms.m = 40;
  ms.seed = 9;
  const CMatrix a = make_matrix(ms);
  const RVector sv = Eigen::JacobiSVD<CMatrix>(a).singularValues();
  CHECK(sv.size() == 6);
  CHECK((a.imag().norm()) == 0.0);
  CHECK(a.real().minCoeff() >= 0.0);
}

TEST_CASE("signal variance convention") {
  CHECK(signal_variance(1e-3, 0.0) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(signal_variance(1e-3, 30.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sparsity bounds") {
  const CMatrix phi = make_matrix(MatrixSpec{MatrixKind::GaussianComplex, 9, 20, 1});
  CHECK_THROWS_AS(make_instance(phi, SignalSpec{0, 30.0, 1e-3, 1, 1}), ConfigError);
  CHECK_NOTHROW(make_instance(phi, SignalSpec{4, 30.0, 1e-3, 1, 1}));
  CHECK_THROWS_AS(make_instance(phi, SignalSpec{5, 30.0, 1e-3, 1, 1}), ConfigError);
  CHECK_THROWS_AS(make_instance(phi, SignalSpec{2, 30.0, 1e-3, 0, 1}), ConfigError);
}

TEST_CASE("instance structure") {
  const CMatrix phi = make_matrix(MatrixSpec{MatrixKind::GaussianComplex, 10, 30, 2});
  const Instance in = make_instance(phi, SignalSpec{3, 20.0, 1e-3, 4, 8});
  CHECK(in.support.size() == 3);
  CHECK(std::is_sorted(in.support.begin(), in.support.end()));
  for (Eigen::Index r = 0; r < 30; ++r) {
    const bool on = std::find(in.support.begin(), in.support.end(), static_cast<std::size_t>(r)) != in.support.end();
    CHECK((in.x.row(r).norm() > 0.0) == on);
  }
  const CMatrix noise = in.problem.y - phi * in.x;
  CHECK(noise.norm() > 0.0);
  CHECK(noise.cwiseAbs().maxCoeff() < 0.5);
}

TEST_CASE("signal entries have the configured variance") {
  const CMatrix phi = make_matrix(MatrixSpec{MatrixKind::GaussianComplex, 4, 8, 2});
  double acc = 0.0, acc_re = 0.0;
  std::size_t count = 0;
  for (std::uint64_t k = 0; count < 100000; ++k) {
    const Instance in = make_instance(phi, SignalSpec{2, 10.0, 1e-3, 50, k});
    for (std::size_t idx : in.support) {
      for (Eigen::Index l = 0; l < 50; ++l) {
        const cplx v = in.x(static_cast<Eigen::Index>(idx), l);
        acc += std::norm(v);
        acc_re += v.real() * v.real();
        ++count;
      }
    }
  }
  const double var = acc / static_cast<double>(count);
  CHECK(std::abs(var - 1e-2) <= 0.03 * 1e-2);
  CHECK(std::abs(acc_re / static_cast<double>(count) - 0.5e-2) <= 0.03 * 0.5e-2);
}

TEST_CASE("support indices are uniform (chi-square)") {
  const Eigen::Index m = 12;
  std::vector<double> counts(static_cast<std::size_t>(m), 0.0);
  Rng rng(123);
  const std::size_t draws = 100000;
  for (std::size_t k = 0; k < draws; ++k) {
    for (std::size_t idx : rng.sample_without_replacement(static_cast<std::size_t>(m), 3)) counts[idx] += 1.0;
  }
  const double expect = 3.0 * static_cast<double>(draws) / static_cast<double>(m);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // 99.9th percentile of chi-square with 11 degrees of freedom.
  CHECK(chi2 < 31.26);
}

TEST_CASE("dataset sweep and determinism") {
  const DatasetConfig cfg = small_config(MatrixKind::Ula);
  const Dataset a = make_dataset(cfg);
  CHECK(a.size() == 40);
  CHECK(a.matrices.size() == 1);
  CHECK(cfg.cell_count() == 4);
  CHECK(a.entries[0].sparsity == 1);
  CHECK(a.entries[0].snapshots() == 1);
  CHECK(a.entries[10].snapshots() == 5);
  CHECK(a.entries[20].sparsity == 2);
  CHECK(a.entries[39].cell == 3);
  CHECK_NOTHROW(a.validate());
  const Dataset b = make_dataset(cfg);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK((a.entries[k].y - b.entries[k].y).norm() == 0.0);

  const Dataset g = make_dataset(small_config(MatrixKind::GaussianComplex));
  CHECK(g.matrices.size() == 40);
  CHECK((g.matrices[0] - g.matrices[1]).norm() > 0.0);
}

TEST_CASE("dataset config JSON round trip") {
  const DatasetConfig cfg = small_config(MatrixKind::Ula);
  const DatasetConfig back = parse_dataset_config(dataset_config_to_json(cfg));
  CHECK(dataset_config_to_json(back) == dataset_config_to_json(cfg));
  CHECK_THROWS_AS(parse_dataset_config("{\"matrix\": {}}"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_config("not json"), ConfigError);
}

TEST_CASE("full-scale training config") {
  DatasetConfig cfg;
  cfg.matrix.kind = MatrixKind::Ula;
  cfg.matrix.n = 30;
  cfg.matrix.m = 120;
  cfg.matrix.beta_start = 31.0;
  cfg.matrix.beta_end = 150.0;
  cfg.matrix.grid_step = 1.0;
  cfg.sweep.sparsity = {1, 15};
  cfg.sweep.snr_db = {30.0};
  cfg.sweep.snapshots = {1, 2, 5, 7, 10};
  CHECK_NOTHROW(cfg.validate());
  cfg.sweep.sparsity = {16};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("dataset file round trip") {
  for (MatrixKind kind : {MatrixKind::Ula, MatrixKind::GaussianComplex, MatrixKind::Correlated}) {
    const Dataset a = make_dataset(small_config(kind));
    const std::string bytes = encode_dataset(a);
    const Dataset b = decode_dataset(bytes);
    CHECK(encode_dataset(b) == bytes);
    REQUIRE(b.size() == a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK((a.entries[k].y - b.entries[k].y).norm() == 0.0);
      CHECK((a.entries[k].x - b.entries[k].x).norm() == 0.0);
      CHECK(a.entries[k].support == b.entries[k].support);
      CHECK(a.entries[k].seed == b.entries[k].seed);
      CHECK((a.problem(k).phi - b.problem(k).phi).norm() == 0.0);
    }
  }
}

TEST_CASE("dataset file errors") {
  const Dataset a = make_dataset(small_config(MatrixKind::Ula));
  std::string bytes = encode_dataset(a);
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(decode_dataset(flipped), FormatError);
  CHECK_THROWS_AS(decode_dataset(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_dataset("NOTADATASET"), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "sbl_test_dataset.bin";
  write_dataset(a, path.string());
  const Dataset b = read_dataset(path.string());
  CHECK(encode_dataset(b) == bytes);
  std::filesystem::remove(path);
  try {
    read_dataset("/nonexistent/dir/file.bin");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.path() == "/nonexistent/dir/file.bin");
  }
}
