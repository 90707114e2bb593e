#ifndef QOE_QOE_HPP
#define QOE_QOE_HPP

// Quantile-of-estimators (QoE) pipeline: split n observations into k equal
// blocks, apply a base estimator per block, and return a quantile (component-
// wise or geometric) of the k block estimates. Includes the adversarial
// contamination machinery used by the experiments.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qoe/common.hpp"
#include "qoe/geometry.hpp"
#include "qoe/quantile_core.hpp"
#include "qoe/rng.hpp"

namespace qoe {

// One observation per row. For the OLS estimator the last column is the
// response and the preceding columns are the regressors.
struct Dataset {
  Mat rows;
  std::vector<std::string> names;  // optional column names (CSV header)

  std::size_t n() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
  void validate() const {
    require(rows.rows() >= 1 && rows.cols() >= 1, "Dataset: must be nonempty");
    require(rows.allFinite(), "Dataset: non-finite entry");
    require(names.empty() || names.size() == dim(), "Dataset: header/column mismatch");
  }
};

// k contiguous blocks of exactly floor(n/k) indices; trailing leftovers are
// discarded (their count is recorded).
struct BlockPartition {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t block_size = 0;
  std::size_t discarded = 0;

  // Half-open index range of block i.
  std::pair<std::size_t, std::size_t> block(std::size_t i) const {
    require(i < k, "BlockPartition: block index out of range");
    return {i * block_size, (i + 1) * block_size};
  }
};

inline BlockPartition partition(std::size_t n, std::size_t k) {
  require(k >= 1, "partition: k must be >= 1");
  require(k <= n, "partition: k must be <= n");
  BlockPartition p;
  p.n = n;
  p.k = k;
  p.block_size = n / k;
  p.discarded = n - k * p.block_size;
  return p;
}

struct BlockCount {
  std::size_t k = 1;
  bool clamped = false;
};

// k = floor(c * n^beta), clamped to [1, n]. The product is snapped to the
// nearest integer first so that e.g. c=1, beta=0.5, n=10^4 cannot land on
// 99 through floating-point underrun.
inline BlockCount block_count(std::size_t n, double c, double beta) {
  require(n >= 1, "block_count: n must be >= 1");
  require(c > 0.0 && is_finite(c), "block_count: c must be positive");
  require(beta > 0.0 && beta < 1.0, "block_count: beta must lie in (0,1)");
  const double raw = snap_to_integer(c * std::pow(static_cast<double>(n), beta));
  BlockCount out;
  double k = std::floor(raw);
  if (k < 1.0) {
    k = 1.0;
    out.clamped = true;
  } else if (k > static_cast<double>(n)) {
    k = static_cast<double>(n);
    out.clamped = true;
  }
  out.k = static_cast<std::size_t>(k);
  return out;
}

struct BetaInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;
  bool contains(double beta) const { return !empty && beta > lo && beta < hi; }
};

// Open interval of admissible block-growth exponents: contamination count
// l = O(n^gamma) is absorbed when beta in (2*gamma, beta_star); empty when
// 2*gamma >= beta_star.
inline BetaInterval admissible_beta(double gamma, double beta_star) {
  require(gamma >= 0.0 && gamma < 1.0, "admissible_beta: gamma must lie in [0,1)");
  require(beta_star > 0.0 && beta_star <= 1.0, "admissible_beta: beta_star must lie in (0,1]");
  BetaInterval iv;
  if (2.0 * gamma < beta_star) {
    iv.lo = 2.0 * gamma;
    iv.hi = beta_star;
    iv.empty = false;
  }
  return iv;
}

enum class Placement { WorstCaseOnePerBlock, UniformRandom, Prefix };
enum class AdversaryKind { FixedValue, Amplitude, Dependent };
enum class SignPattern { AllPlus, Alternating, DataSign };

struct ContaminationSpec {
  std::size_t count = 0;  // number of replaced rows (l)
  Placement placement = Placement::WorstCaseOnePerBlock;
  AdversaryKind adversary = AdversaryKind::Amplitude;
  double value = 1e9;     // FixedValue: the value; Amplitude: the magnitude M
  SignPattern pattern = SignPattern::AllPlus;  // Amplitude sign choice
  double dependent_factor = 1000.0;  // Dependent: multiple of the clean column max

  // Convenience: l = floor(n^gamma) (gamma = 0 means no contamination here;
  // the harness uses that convention for sweep grids).
  static std::size_t count_from_rate(std::size_t n, double gamma) {
    require(gamma >= 0.0 && gamma < 1.0, "count_from_rate: gamma must lie in [0,1)");
    if (gamma == 0.0) return 0;
    const double raw = snap_to_integer(std::pow(static_cast<double>(n), gamma));
    return static_cast<std::size_t>(std::floor(raw));
  }
};

struct ContaminationResult {
  Dataset data;
  std::vector<std::size_t> indices;  // affected rows, ascending
};

namespace detail {

inline std::vector<std::size_t> placement_indices(const ContaminationSpec& spec,
                                                  const BlockPartition& part,
                                                  std::uint64_t seed) {
  const std::size_t l = spec.count;
  std::vector<std::size_t> idx;
  idx.reserve(l);
  switch (spec.placement) {
    case Placement::WorstCaseOnePerBlock:
      require(l <= part.k,
              "contaminate: WorstCaseOnePerBlock needs count <= k");
      for (std::size_t b = 0; b < l; ++b) idx.push_back(part.block(b).first);
      break;
    case Placement::Prefix:
      for (std::size_t i = 0; i < l; ++i) idx.push_back(i);
      break;
    case Placement::UniformRandom: {
      // Partial Fisher-Yates over [0, n): first l entries after l swap steps
      // are a uniform distinct sample.
      RngStream rng(seed, 0);
      std::vector<std::size_t> perm(part.n);
      for (std::size_t i = 0; i < part.n; ++i) perm[i] = i;
      for (std::size_t i = 0; i < l; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(
                                      static_cast<std::uint64_t>(part.n - i)));
        std::swap(perm[i], perm[j]);
      }
      idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(l));
      std::sort(idx.begin(), idx.end());
      break;
    }
  }
  return idx;
}

}  // namespace detail

// Replace spec.count rows of `data` according to the placement and adversary.
// The input dataset is left untouched; affected indices are reported in
// ascending order. The Dependent adversary sees the clean data (per-column
// max magnitude) before replacing.
inline ContaminationResult contaminate(const Dataset& data, const ContaminationSpec& spec,
                                       const BlockPartition& part, std::uint64_t seed) {
  data.validate();
  require(part.n == data.n(), "contaminate: partition built for a different n");
  require(spec.count <= data.n(), "contaminate: count must be <= n");

  ContaminationResult out;
  out.data = data;
  if (spec.count == 0) return out;
  out.indices = detail::placement_indices(spec, part, seed);

  const std::size_t d = data.dim();
  Vec col_max = Vec::Zero(static_cast<Eigen::Index>(d));
  if (spec.adversary == AdversaryKind::Dependent)
    col_max = data.rows.cwiseAbs().colwise().maxCoeff();

  for (std::size_t j = 0; j < out.indices.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(out.indices[j]);
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c) {
      switch (spec.adversary) {
        case AdversaryKind::FixedValue:
          out.data.rows(r, c) = spec.value;
          break;
        case AdversaryKind::Amplitude: {
          double sign = 1.0;
          if (spec.pattern == SignPattern::Alternating)
            sign = (j % 2 == 0) ? 1.0 : -1.0;
          else if (spec.pattern == SignPattern::DataSign)
            sign = (data.rows(r, c) < 0.0) ? -1.0 : 1.0;
          out.data.rows(r, c) = sign * spec.value;
          break;
        }
        case AdversaryKind::Dependent:
          out.data.rows(r, c) = spec.dependent_factor * col_max(c);
          break;
      }
    }
  }
  return out;
}

struct BaseEstimator {
  enum class Kind { Mean, OLS, Variance, SampleQuantile };
  Kind kind = Kind::Mean;
  double alpha = 0.5;  // SampleQuantile order

  std::size_t output_dim(const Dataset& data) const {
    switch (kind) {
      case Kind::Mean:
      case Kind::SampleQuantile:
        return data.dim();
      case Kind::Variance:
        require(data.dim() == 1, "Variance estimator requires univariate data");
        return 1;
      case Kind::OLS:
        require(data.dim() >= 2,
                "OLS estimator requires at least one regressor plus response");
        return data.dim() - 1;
    }
    fail_arg("BaseEstimator: unknown kind");
  }
};

struct BlockEstimates {
  Mat estimates;                        // k x d_out, row i = block i
  std::vector<std::uint8_t> degenerate; // per-block OLS rank-deficiency flag
  bool any_degenerate = false;
};

namespace detail {

inline Vec block_mean(const Mat& block) {
  return block.colwise().mean().transpose();
}

// Unbiased sample variance == the U-statistic average of h(x1,x2)=(x1-x2)^2/2
// over all pairs.
inline double block_variance(const Mat& block) {
  const auto m = block.rows();
  require(m >= 2, "Variance estimator needs block size >= 2");
  const double mean = block.col(0).mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) ss += sqr(block(i, 0) - mean);
  return ss / static_cast<double>(m - 1);
}

inline Vec block_sample_quantile(const Mat& block, double alpha) {
  Vec out(block.cols());
  std::vector<double> col(static_cast<std::size_t>(block.rows()));
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    for (Eigen::Index i = 0; i < block.rows(); ++i)
      col[static_cast<std::size_t>(i)] = block(i, c);
    out(c) = univariate_quantile(col, alpha);
  }
  return out;
}

// Least squares on [X | y] rows; minimum-norm solution under rank deficiency
// (complete orthogonal decomposition), with a degeneracy flag.
inline Vec block_ols(const Mat& block, bool& degenerate) {
  const Eigen::Index p = block.cols() - 1;
  const Mat X = block.leftCols(p);
  const Vec y = block.col(p);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(X);
  degenerate = cod.rank() < p;  // includes underdetermined blocks (rows < p)
  return cod.solve(y);
}

}  // namespace detail

inline BlockEstimates block_estimates(const Dataset& data, const BaseEstimator& est,
                                      const BlockPartition& part) {
  data.validate();
  require(part.n == data.n(), "block_estimates: partition built for a different n");
  require(part.block_size >= 1, "block_estimates: empty blocks");
  const std::size_t d_out = est.output_dim(data);

  BlockEstimates out;
  out.estimates.resize(static_cast<Eigen::Index>(part.k), static_cast<Eigen::Index>(d_out));
  out.degenerate.assign(part.k, 0);
  for (std::size_t b = 0; b < part.k; ++b) {
    const auto [lo, hi] = part.block(b);
    const Mat block = data.rows.middleRows(static_cast<Eigen::Index>(lo),
                                           static_cast<Eigen::Index>(hi - lo));
    Vec e;
    switch (est.kind) {
      case BaseEstimator::Kind::Mean:
        e = detail::block_mean(block);
        break;
      case BaseEstimator::Kind::Variance:
        e = Vec::Constant(1, detail::block_variance(block));
        break;
      case BaseEstimator::Kind::SampleQuantile:
        e = detail::block_sample_quantile(block, est.alpha);
        break;
      case BaseEstimator::Kind::OLS: {
        bool degenerate = false;
        e = detail::block_ols(block, degenerate);
        if (degenerate) {
          out.degenerate[b] = 1;
          out.any_degenerate = true;
        }
        break;
      }
    }
    out.estimates.row(static_cast<Eigen::Index>(b)) = e.transpose();
  }
  return out;
}

struct QuantileSpec {
  enum class Method { Componentwise, Geometric };
  Method method = Method::Componentwise;
  AlphaVector alphas{std::vector<double>{0.5}};  // componentwise orders (broadcast)
  Vec u = Vec::Zero(1);                          // geometric direction
};

struct QoEConfig {
  // Block rule: explicit k when > 0, otherwise k = floor(c * n^beta).
  std::size_t k = 0;
  double c = 1.0;
  double beta = 0.5;
  QuantileSpec quantile;
  double beta_star = 0.5;  // admissibility ceiling for the rate form
  double gamma = 0.0;      // contamination growth exponent (0 = none)
  SolverOptions solver;
  // Optional seeded pre-shuffle of row order before blocking; block-aware
  // adversaries make placement order matter even for i.i.d. data.
  bool pre_shuffle = false;
  std::uint64_t shuffle_seed = 0;
};

struct QoEDiagnostics {
  std::size_t k = 0;
  std::size_t block_size = 0;
  std::size_t discarded = 0;
  bool clamped_k = false;
  std::vector<std::uint8_t> degenerate;
  bool any_degenerate = false;
  GeoStatus geo_status = GeoStatus::Interior;  // geometric method only
  bool geo_converged = true;
  double geo_residual = 0.0;
};

struct QoEResult {
  Vec estimate;
  QoEDiagnostics diag;
};

inline PointSet point_set_from_rows(const Mat& rows) {
  PointSet p;
  p.points.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    p.points.push_back(rows.row(i).transpose());
  return p;
}

// Full pipeline: resolve k, partition, per-block estimates, quantile.
// Rate-form configs with gamma > 0 must have beta inside the admissible
// interval (2*gamma, beta_star); violations are configuration errors.
inline QoEResult qoe_estimate(const Dataset& data, const BaseEstimator& est,
                              const QoEConfig& cfg) {
  data.validate();
  QoEResult out;

  std::size_t k = cfg.k;
  if (k == 0) {
    if (cfg.gamma > 0.0) {
      const BetaInterval iv = admissible_beta(cfg.gamma, cfg.beta_star);
      if (!iv.contains(cfg.beta)) {
        std::string span = iv.empty ? "empty"
                                    : "(" + std::to_string(iv.lo) + ", " +
                                          std::to_string(iv.hi) + ")";
        throw config_error("qoe_estimate: beta = " + std::to_string(cfg.beta) +
                           " outside admissible interval " + span +
                           " for gamma = " + std::to_string(cfg.gamma));
      }
    }
    const BlockCount bc = block_count(data.n(), cfg.c, cfg.beta);
    k = bc.k;
    out.diag.clamped_k = bc.clamped;
  }

  const Dataset* working = &data;
  Dataset shuffled;
  if (cfg.pre_shuffle) {
    shuffled = data;
    RngStream rng(cfg.shuffle_seed, 0);
    for (std::size_t i = data.n() - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(
          rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
      shuffled.rows.row(static_cast<Eigen::Index>(i)).swap(shuffled.rows.row(j));
    }
    working = &shuffled;
  }

  const BlockPartition part = partition(working->n(), k);
  const BlockEstimates be = block_estimates(*working, est, part);
  out.diag.k = part.k;
  out.diag.block_size = part.block_size;
  out.diag.discarded = part.discarded;
  out.diag.degenerate = be.degenerate;
  out.diag.any_degenerate = be.any_degenerate;

  const PointSet points = point_set_from_rows(be.estimates);
  if (cfg.quantile.method == QuantileSpec::Method::Componentwise) {
    out.estimate = componentwise_quantile(points, cfg.quantile.alphas);
  } else {
    require(cfg.quantile.u.size() == be.estimates.cols(),
            "qoe_estimate: geometric direction dimension mismatch");
    const GeoQuantileResult g = geometric_quantile(points, cfg.quantile.u, cfg.solver);
    out.estimate = g.point;
    out.diag.geo_status = g.status;
    out.diag.geo_converged = g.converged;
    out.diag.geo_residual = g.residual;
  }
  return out;
}

}  // namespace qoe

#endif  // QOE_QOE_HPP
