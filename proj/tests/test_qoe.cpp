#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qoe/asymptotics.hpp"
#include "qoe/qoe.hpp"
#include "qoe/rng.hpp"

using qoe::BaseEstimator;
using qoe::ContaminationSpec;
using qoe::Dataset;
using qoe::Mat;
using qoe::Vec;

namespace {

Dataset column_dataset(const std::vector<double>& v) {
  Dataset d;
  d.rows.resize(static_cast<Eigen::Index>(v.size()), 1);
  for (Eigen::Index i = 0; i < d.rows.rows(); ++i)
    d.rows(i, 0) = v[static_cast<std::size_t>(i)];
  return d;
}

}  // namespace

TEST_CASE("partition: examples", "[qoe]") {
  const auto p = qoe::partition(10, 3);
  CHECK(p.block_size == 3);
  CHECK(p.discarded == 1);
  CHECK(p.block(0) == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(p.block(2) == std::pair<std::size_t, std::size_t>{6, 9});
  CHECK_THROWS_AS(p.block(3), std::invalid_argument);

  const auto one = qoe::partition(100, 1);
  CHECK(one.block_size == 100);
  CHECK(one.discarded == 0);

  const auto full = qoe::partition(100, 100);
  CHECK(full.block_size == 1);
  CHECK(full.discarded == 0);

  CHECK_THROWS_AS(qoe::partition(5, 0), std::invalid_argument);
  CHECK_THROWS_AS(qoe::partition(5, 6), std::invalid_argument);
}

TEST_CASE("block count: floor(c * n^beta) with integer snap", "[qoe]") {
  CHECK(qoe::block_count(10000, 1.0, 0.5).k == 100);
  CHECK_FALSE(qoe::block_count(10000, 1.0, 0.5).clamped);
  CHECK(qoe::block_count(10000, 2.0, 0.25).k == 20);
  // c * n^beta far above n clamps to n.
  const auto big = qoe::block_count(10, 100.0, 0.9);
  CHECK(big.k == 10);
  CHECK(big.clamped);
  // Below 1 clamps to 1.
  const auto small = qoe::block_count(4, 0.1, 0.5);
  CHECK(small.k == 1);
  CHECK(small.clamped);
  // 0.1 * 1000^(1/3) evaluates to 0.999...98 in floating point; the snap
  // must land it on exactly 1 (no clamping).
  const auto snap = qoe::block_count(1000, 0.1, 1.0 / 3.0);
  CHECK(snap.k == 1);
  CHECK_FALSE(snap.clamped);
  CHECK(qoe::block_count(10, 3.0, 0.5).k == 9);  // floor(9.4868)

  CHECK_THROWS_AS(qoe::block_count(0, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(qoe::block_count(10, 0.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(qoe::block_count(10, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("admissible beta interval", "[qoe]") {
  const auto iv = qoe::admissible_beta(0.2, 0.5);
  CHECK_FALSE(iv.empty);
  CHECK(iv.lo == Catch::Approx(0.4));
  CHECK(iv.hi == Catch::Approx(0.5));
  CHECK(iv.contains(0.45));
  CHECK_FALSE(iv.contains(0.4));  // open endpoints
  CHECK_FALSE(iv.contains(0.5));

  CHECK(qoe::admissible_beta(0.3, 0.5).empty);
  CHECK_FALSE(qoe::admissible_beta(0.3, 0.5).contains(0.45));

  const auto full = qoe::admissible_beta(0.0, 1.0);
  CHECK(full.contains(0.5));
  CHECK(full.lo == 0.0);
  CHECK(full.hi == 1.0);
}

TEST_CASE("contamination count from rate", "[qoe]") {
  CHECK(ContaminationSpec::count_from_rate(10000, 0.0) == 0);
  CHECK(ContaminationSpec::count_from_rate(10000, 0.25) == 10);
  CHECK(ContaminationSpec::count_from_rate(10000, 0.5) == 100);
  // 1000^(1/3) = 9.999...; the snap keeps l = 10.
  CHECK(ContaminationSpec::count_from_rate(1000, 1.0 / 3.0) == 10);
  CHECK_THROWS_AS(ContaminationSpec::count_from_rate(10, 1.0), std::invalid_argument);
}

TEST_CASE("contaminate: zero count leaves data bit-identical", "[qoe]") {
  qoe::RngStream rng(3, 0);
  Dataset d;
  d.rows.resize(20, 2);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) d.rows(i, j) = rng.normal();
  ContaminationSpec spec;
  spec.count = 0;
  const auto out = qoe::contaminate(d, spec, qoe::partition(20, 4), 1);
  CHECK(out.indices.empty());
  CHECK(out.data.rows == d.rows);
}

TEST_CASE("contaminate: worst-case placement hits distinct leading blocks", "[qoe]") {
  Dataset d;
  d.rows = Mat::Zero(100, 1);
  ContaminationSpec spec;
  spec.count = 5;
  spec.adversary = qoe::AdversaryKind::FixedValue;
  spec.value = 1e9;
  const auto part = qoe::partition(100, 10);
  const auto out = qoe::contaminate(d, spec, part, 1);
  CHECK(out.indices == std::vector<std::size_t>{0, 10, 20, 30, 40});
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < 100; ++i)
    if (out.data.rows(i, 0) == 1e9) ++hit;
  CHECK(hit == 5);
  // Original untouched.
  CHECK(d.rows.cwiseAbs().maxCoeff() == 0.0);

  ContaminationSpec toomany = spec;
  toomany.count = 11;
  CHECK_THROWS_AS(qoe::contaminate(d, toomany, part, 1), std::invalid_argument);
}

TEST_CASE("contaminate: fixed value replaces exactly count rows", "[qoe]") {
  Dataset d;
  d.rows = Mat::Ones(50, 2);
  ContaminationSpec spec;
  spec.count = 10;
  spec.placement = qoe::Placement::Prefix;
  spec.adversary = qoe::AdversaryKind::FixedValue;
  spec.value = 1e9;
  const auto out = qoe::contaminate(d, spec, qoe::partition(50, 5), 1);
  REQUIRE(out.indices.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(out.indices[i] == i);
  std::size_t rows_hit = 0;
  for (Eigen::Index i = 0; i < 50; ++i)
    if (out.data.rows(i, 0) == 1e9 && out.data.rows(i, 1) == 1e9) ++rows_hit;
  CHECK(rows_hit == 10);
}

TEST_CASE("contaminate: uniform placement is a deterministic distinct sample",
          "[qoe]") {
  Dataset d;
  d.rows = Mat::Zero(30, 1);
  ContaminationSpec spec;
  spec.count = 8;
  spec.placement = qoe::Placement::UniformRandom;
  const auto part = qoe::partition(30, 3);
  const auto a = qoe::contaminate(d, spec, part, 42);
  const auto b = qoe::contaminate(d, spec, part, 42);
  CHECK(a.indices == b.indices);
  REQUIRE(a.indices.size() == 8);
  for (std::size_t i = 0; i + 1 < a.indices.size(); ++i)
    CHECK(a.indices[i] < a.indices[i + 1]);  // sorted and distinct
  CHECK(a.indices.back() < 30);
  const auto c = qoe::contaminate(d, spec, part, 43);
  CHECK(a.indices != c.indices);
}

TEST_CASE("contaminate: amplitude sign patterns", "[qoe]") {
  Dataset d;
  d.rows.resize(6, 1);
  d.rows << 1.0, -2.0, 3.0, -4.0, 5.0, -6.0;
  const auto part = qoe::partition(6, 6);

  ContaminationSpec spec;
  spec.count = 4;
  spec.placement = qoe::Placement::Prefix;
  spec.adversary = qoe::AdversaryKind::Amplitude;
  spec.value = 100.0;

  spec.pattern = qoe::SignPattern::AllPlus;
  auto out = qoe::contaminate(d, spec, part, 1);
  for (int i = 0; i < 4; ++i) CHECK(out.data.rows(i, 0) == 100.0);

  spec.pattern = qoe::SignPattern::Alternating;
  out = qoe::contaminate(d, spec, part, 1);
  CHECK(out.data.rows(0, 0) == 100.0);
  CHECK(out.data.rows(1, 0) == -100.0);
  CHECK(out.data.rows(2, 0) == 100.0);
  CHECK(out.data.rows(3, 0) == -100.0);

  spec.pattern = qoe::SignPattern::DataSign;
  out = qoe::contaminate(d, spec, part, 1);
  CHECK(out.data.rows(0, 0) == 100.0);   // clean value 1.0
  CHECK(out.data.rows(1, 0) == -100.0);  // clean value -2.0
  CHECK(out.data.rows(2, 0) == 100.0);
  CHECK(out.data.rows(3, 0) == -100.0);
}

TEST_CASE("contaminate: dependent adversary scales the clean column max", "[qoe]") {
  Dataset d;
  d.rows.resize(4, 2);
  d.rows << 1.0, -7.0, -3.0, 2.0, 0.5, 1.0, 2.0, -1.0;
  ContaminationSpec spec;
  spec.count = 2;
  spec.placement = qoe::Placement::Prefix;
  spec.adversary = qoe::AdversaryKind::Dependent;
  spec.dependent_factor = 1000.0;
  const auto out = qoe::contaminate(d, spec, qoe::partition(4, 2), 1);
  CHECK(out.data.rows(0, 0) == 1000.0 * 3.0);
  CHECK(out.data.rows(0, 1) == 1000.0 * 7.0);
  CHECK(out.data.rows(1, 0) == 1000.0 * 3.0);
  CHECK(out.data.rows(1, 1) == 1000.0 * 7.0);
}

TEST_CASE("block estimates: mean of constant data", "[qoe]") {
  Dataset d;
  d.rows = Mat::Constant(12, 2, 3.5);
  BaseEstimator est;
  const auto be = qoe::block_estimates(d, est, qoe::partition(12, 4));
  CHECK(be.estimates.rows() == 4);
  CHECK(be.estimates.cols() == 2);
  CHECK((be.estimates.array() == 3.5).all());
  CHECK_FALSE(be.any_degenerate);
}

TEST_CASE("block estimates: variance is the pair U-statistic", "[qoe]") {
  // Block (0, 2): unbiased variance ((0-1)^2 + (2-1)^2) / 1 = 2, which is
  // also mean of (x1 - x2)^2 / 2 over ordered pairs.
  const auto d = column_dataset({0.0, 2.0});
  BaseEstimator est;
  est.kind = BaseEstimator::Kind::Variance;
  const auto be = qoe::block_estimates(d, est, qoe::partition(2, 1));
  CHECK(be.estimates(0, 0) == 2.0);

  // Blocks of size 1 cannot carry an unbiased variance.
  const auto d3 = column_dataset({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(qoe::block_estimates(d3, est, qoe::partition(3, 3)),
                  std::invalid_argument);
}

TEST_CASE("block estimates: sample quantile per block", "[qoe]") {
  const auto d = column_dataset({1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0});
  BaseEstimator est;
  est.kind = BaseEstimator::Kind::SampleQuantile;
  est.alpha = 0.5;
  const auto be = qoe::block_estimates(d, est, qoe::partition(8, 2));
  CHECK(be.estimates(0, 0) == 2.5);
  CHECK(be.estimates(1, 0) == 25.0);
}

TEST_CASE("block estimates: OLS recovers exact linear data", "[qoe]") {
  // Rows are [x1 x2 y] with y = 2 x1 - x2 exactly.
  qoe::RngStream rng(5, 0);
  Dataset d;
  d.rows.resize(40, 3);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const double x1 = rng.normal(), x2 = rng.normal();
    d.rows(i, 0) = x1;
    d.rows(i, 1) = x2;
    d.rows(i, 2) = 2.0 * x1 - x2;
  }
  BaseEstimator est;
  est.kind = BaseEstimator::Kind::OLS;
  const auto be = qoe::block_estimates(d, est, qoe::partition(40, 4));
  for (Eigen::Index b = 0; b < 4; ++b) {
    CHECK(be.estimates(b, 0) == Catch::Approx(2.0).margin(1e-10));
    CHECK(be.estimates(b, 1) == Catch::Approx(-1.0).margin(1e-10));
  }
  CHECK_FALSE(be.any_degenerate);
}

TEST_CASE("block estimates: degenerate OLS flagged with min-norm solution",
          "[qoe]") {
  // Duplicated regressor: X = [t t], y = 2t. Infinitely many solutions;
  // the minimum-norm one is (1, 1).
  Dataset d;
  d.rows.resize(4, 3);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double t = static_cast<double>(i + 1);
    d.rows(i, 0) = t;
    d.rows(i, 1) = t;
    d.rows(i, 2) = 2.0 * t;
  }
  BaseEstimator est;
  est.kind = BaseEstimator::Kind::OLS;
  const auto be = qoe::block_estimates(d, est, qoe::partition(4, 1));
  CHECK(be.any_degenerate);
  CHECK(be.degenerate[0] == 1);
  CHECK(be.estimates.allFinite());
  CHECK(be.estimates(0, 0) == Catch::Approx(1.0).margin(1e-10));
  CHECK(be.estimates(0, 1) == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("qoe estimate: constant data reproduces the constant", "[qoe]") {
  Dataset d;
  d.rows = Mat::Constant(30, 2, -1.25);
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 5;
  const auto res = qoe::qoe_estimate(d, est, cfg);
  CHECK(res.estimate(0) == -1.25);
  CHECK(res.estimate(1) == -1.25);
  CHECK(res.diag.k == 5);
  CHECK(res.diag.block_size == 6);
}

TEST_CASE("qoe estimate: median lies between the extreme block means", "[qoe]") {
  qoe::RngStream rng(9, 0);
  Dataset d;
  d.rows.resize(90, 1);
  for (Eigen::Index i = 0; i < 90; ++i) d.rows(i, 0) = rng.normal();
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 9;
  const auto res = qoe::qoe_estimate(d, est, cfg);
  const auto be = qoe::block_estimates(d, est, qoe::partition(90, 9));
  CHECK(res.estimate(0) >= be.estimates.col(0).minCoeff());
  CHECK(res.estimate(0) <= be.estimates.col(0).maxCoeff());
  // The componentwise median at odd k is one of the block estimates.
  double best = 1e300;
  for (Eigen::Index b = 0; b < 9; ++b)
    best = std::min(best, std::abs(be.estimates(b, 0) - res.estimate(0)));
  CHECK(best == 0.0);
}

TEST_CASE("qoe estimate: near-root-n accuracy on standard normal data", "[qoe]") {
  // With n = 10^4 and k = 100, |T| stays within 5 sd of the asymptotic
  // N(0, (pi/2)/n) limit in the vast majority of replications.
  const std::size_t n = 10000;
  const double bound = 5.0 * std::sqrt(qoe::kPi / 2.0) / std::sqrt(static_cast<double>(n));
  std::size_t exceed = 0;
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 100;
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    qoe::RngStream rng(17, rep);
    Dataset d;
    d.rows.resize(static_cast<Eigen::Index>(n), 1);
    for (Eigen::Index i = 0; i < d.rows.rows(); ++i) d.rows(i, 0) = rng.normal();
    const auto res = qoe::qoe_estimate(d, est, cfg);
    if (std::abs(res.estimate(0)) > bound) ++exceed;
  }
  CHECK(exceed <= 3);  // >= 99% of replications inside the band
}

TEST_CASE("qoe estimate: rate-form admissibility is enforced", "[qoe]") {
  Dataset d;
  d.rows = Mat::Zero(1000, 1);
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 0;  // rate form
  cfg.gamma = 0.3;
  cfg.beta = 0.5;
  cfg.beta_star = 0.5;  // interval (0.6, 0.5) is empty
  CHECK_THROWS_AS(qoe::qoe_estimate(d, est, cfg), qoe::config_error);

  cfg.gamma = 0.2;
  cfg.beta = 0.45;  // inside (0.4, 0.5)
  CHECK_NOTHROW(qoe::qoe_estimate(d, est, cfg));

  cfg.gamma = 0.2;
  cfg.beta = 0.35;  // below the open interval
  CHECK_THROWS_AS(qoe::qoe_estimate(d, est, cfg), qoe::config_error);
}

TEST_CASE("qoe estimate: geometric method on bivariate blocks", "[qoe]") {
  qoe::RngStream rng(21, 0);
  Dataset d;
  d.rows.resize(400, 2);
  for (Eigen::Index i = 0; i < 400; ++i) {
    d.rows(i, 0) = rng.normal();
    d.rows(i, 1) = rng.normal();
  }
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 20;
  cfg.quantile.method = qoe::QuantileSpec::Method::Geometric;
  cfg.quantile.u = Vec::Zero(2);
  const auto res = qoe::qoe_estimate(d, est, cfg);
  CHECK(res.diag.geo_converged);
  CHECK(res.estimate.norm() < 1.0);  // block means concentrate near the origin
  // Geometric direction must match the block-estimate dimension.
  qoe::QoEConfig bad = cfg;
  bad.quantile.u = Vec::Zero(3);
  CHECK_THROWS_AS(qoe::qoe_estimate(d, est, bad), std::invalid_argument);
}

TEST_CASE("qoe estimate: pre-shuffle is seeded and deterministic", "[qoe]") {
  qoe::RngStream rng(33, 0);
  Dataset d;
  d.rows.resize(60, 1);
  for (Eigen::Index i = 0; i < 60; ++i) d.rows(i, 0) = rng.normal();
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 6;
  cfg.pre_shuffle = true;
  cfg.shuffle_seed = 5;
  const auto a = qoe::qoe_estimate(d, est, cfg);
  const auto b = qoe::qoe_estimate(d, est, cfg);
  CHECK(a.estimate(0) == b.estimate(0));
  cfg.shuffle_seed = 6;
  const auto c = qoe::qoe_estimate(d, est, cfg);
  CHECK(a.estimate(0) != c.estimate(0));
}

TEST_CASE("qoe estimate: clamped k is reported", "[qoe]") {
  Dataset d;
  d.rows = Mat::Zero(8, 1);
  BaseEstimator est;
  qoe::QoEConfig cfg;
  cfg.k = 0;
  cfg.c = 0.05;  // 0.05 * sqrt(8) < 1 -> clamp to 1
  cfg.beta = 0.5;
  const auto res = qoe::qoe_estimate(d, est, cfg);
  CHECK(res.diag.k == 1);
  CHECK(res.diag.clamped_k);
}

TEST_CASE("qoe estimate: worst-case contamination moves at most l block cells",
          "[qoe]") {
  // Replacing l rows perturbs at most l of the k block estimates, so the
  // componentwise quantile moves by at most the gap between nearby order
  // statistics of the clean block estimates.
  qoe::RngStream rng(55, 0);
  const std::size_t n = 900, k = 30, l = 6;
  Dataset d;
  d.rows.resize(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < d.rows.rows(); ++i) d.rows(i, 0) = rng.normal();

  ContaminationSpec spec;
  spec.count = l;
  spec.adversary = qoe::AdversaryKind::Amplitude;
  spec.value = 1e9;
  const auto part = qoe::partition(n, k);
  const auto bad = qoe::contaminate(d, spec, part, 2);

  BaseEstimator est;
  const auto clean_est = qoe::block_estimates(d, est, part);
  const auto dirty_est = qoe::block_estimates(bad.data, est, part);
  std::size_t moved = 0;
  for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(k); ++b)
    if (clean_est.estimates(b, 0) != dirty_est.estimates(b, 0)) ++moved;
  CHECK(moved == l);

  qoe::QoEConfig cfg;
  cfg.k = k;
  const auto clean = qoe::qoe_estimate(d, est, cfg);
  const auto dirty = qoe::qoe_estimate(bad.data, est, cfg);
  std::vector<double> sorted(static_cast<std::size_t>(k));
  for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(k); ++b)
    sorted[static_cast<std::size_t>(b)] = clean_est.estimates(b, 0);
  std::sort(sorted.begin(), sorted.end());
  // Median rank 15/16 can shift by at most l ranks in either direction.
  const double lo = sorted[15 - 1 - l];
  const double hi = sorted[16 - 1 + l];
  CHECK(dirty.estimate(0) >= lo);
  CHECK(dirty.estimate(0) <= hi);
  CHECK(std::abs(dirty.estimate(0)) < 10.0);  // far from the 1e9 outliers
  CHECK(clean.estimate(0) != dirty.estimate(0));
}
