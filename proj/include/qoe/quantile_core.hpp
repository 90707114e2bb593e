#ifndef QOE_QUANTILE_CORE_HPP
#define QOE_QUANTILE_CORE_HPP

// Univariate and component-wise quantiles of finite point sets.
//
// The univariate quantile of k values at level alpha averages the order
// statistics with (1-based) ranks ceil(k*alpha) and floor(k*alpha + 1); when
// k*alpha is an integer these are adjacent ranks, otherwise they coincide.
// No other interpolation is applied. A lower-quantile variant returns the
// smallest data point x with #{x_j <= x} >= k*alpha and #{x_j >= x} >=
// k*(1-alpha).

#include <algorithm>
#include <cstddef>
#include <vector>

#include "qoe/common.hpp"

namespace qoe {

// A set of k points in R^d, stored one point per entry.
struct PointSet {
  std::vector<Vec> points;

  std::size_t size() const { return points.size(); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }

  void validate() const {
    require(!points.empty(), "PointSet: at least one point required");
    const int d = dim();
    require(d >= 1, "PointSet: dimension must be >= 1");
    for (const Vec& p : points) {
      require(static_cast<int>(p.size()) == d, "PointSet: inconsistent dimensions");
      require(all_finite(p), "PointSet: non-finite coordinate");
    }
  }
};

// k sample paths observed on a common strictly increasing time grid.
struct PathSet {
  std::vector<double> grid;
  std::vector<std::vector<double>> paths;

  void validate() const {
    require(!grid.empty(), "PathSet: empty grid");
    require(!paths.empty(), "PathSet: at least one path required");
    for (std::size_t j = 1; j < grid.size(); ++j)
      require(grid[j] > grid[j - 1], "PathSet: grid must be strictly increasing");
    for (const auto& f : paths) {
      require(f.size() == grid.size(), "PathSet: path/grid length mismatch");
      require_finite(f, "PathSet");
    }
  }
};

// Per-coordinate quantile levels; a single entry broadcasts to any width.
struct AlphaVector {
  std::vector<double> alphas;

  void validate() const {
    require(!alphas.empty(), "AlphaVector: empty");
    for (double a : alphas)
      require(a > 0.0 && a < 1.0, "AlphaVector: alpha must lie strictly in (0,1)");
  }

  // Level for coordinate l of a d-dimensional target.
  double at(std::size_t l, std::size_t d) const {
    if (alphas.size() == 1) return alphas.front();
    require(alphas.size() == d, "AlphaVector: length must be 1 or match dimension");
    return alphas[l];
  }
};

namespace detail {

// 1-based order-statistic ranks (i1, i2) for level alpha over k values, with
// integer snapping so that e.g. alpha = 3/10, k = 10 lands on the integral
// case exactly.
inline std::pair<std::size_t, std::size_t> quantile_ranks(std::size_t k, double alpha) {
  require(k >= 1, "quantile: empty input");
  require(alpha > 0.0 && alpha < 1.0, "quantile: alpha must lie strictly in (0,1)");
  const double ka = snap_to_integer(static_cast<double>(k) * alpha);
  auto i1 = static_cast<std::size_t>(std::ceil(ka));
  auto i2 = static_cast<std::size_t>(std::floor(ka + 1.0));
  if (i1 < 1) i1 = 1;
  if (i2 > k) i2 = k;  // cannot occur for alpha < 1; kept as a guard
  if (i2 < i1) i2 = i1;
  return {i1, i2};
}

inline double quantile_of_sorted(const std::vector<double>& sorted, double alpha) {
  const auto [i1, i2] = quantile_ranks(sorted.size(), alpha);
  return 0.5 * (sorted[i1 - 1] + sorted[i2 - 1]);
}

// True when k*alpha lands on {1, ..., k-1}, i.e. the quantile averages two
// distinct adjacent order statistics (the non-uniqueness lattice).
inline bool alpha_on_lattice(std::size_t k, double alpha) {
  const double ka = snap_to_integer(static_cast<double>(k) * alpha);
  return ka == std::floor(ka) && ka >= 1.0 && ka <= static_cast<double>(k) - 1.0;
}

}  // namespace detail

inline double univariate_quantile(std::vector<double> x, double alpha) {
  require(!x.empty(), "univariate_quantile: empty input");
  require_finite(x, "univariate_quantile");
  std::sort(x.begin(), x.end());
  return detail::quantile_of_sorted(x, alpha);
}

// Lower quantile: the smallest data point satisfying both counting
// constraints. Always one of the input values.
inline double univariate_quantile_lower(std::vector<double> x, double alpha) {
  require(!x.empty(), "univariate_quantile_lower: empty input");
  require(alpha > 0.0 && alpha < 1.0,
          "univariate_quantile_lower: alpha must lie strictly in (0,1)");
  require_finite(x, "univariate_quantile_lower");
  std::sort(x.begin(), x.end());
  const auto k = x.size();
  const double ka = snap_to_integer(static_cast<double>(k) * alpha);
  const double kb = snap_to_integer(static_cast<double>(k) * (1.0 - alpha));
  // Walk distinct values in increasing order; counts are exact integers.
  std::size_t i = 0;
  while (i < k) {
    std::size_t j = i;
    while (j + 1 < k && x[j + 1] == x[i]) ++j;
    const auto below_or_eq = static_cast<double>(j + 1);  // #{x_l <= x[i]}
    const auto above_or_eq = static_cast<double>(k - i);  // #{x_l >= x[i]}
    if (below_or_eq >= ka && above_or_eq >= kb) return x[i];
    i = j + 1;
  }
  return x.back();  // unreachable for valid alpha; defensive
}

// Coordinate-wise quantile of a point set.
inline Vec componentwise_quantile(const PointSet& p, const AlphaVector& alpha) {
  p.validate();
  alpha.validate();
  const auto d = static_cast<std::size_t>(p.dim());
  Vec out(static_cast<Eigen::Index>(d));
  std::vector<double> column(p.size());
  for (std::size_t l = 0; l < d; ++l) {
    for (std::size_t i = 0; i < p.size(); ++i)
      column[i] = p.points[i](static_cast<Eigen::Index>(l));
    std::sort(column.begin(), column.end());
    out(static_cast<Eigen::Index>(l)) = detail::quantile_of_sorted(column, alpha.at(l, d));
  }
  return out;
}

// Point-wise quantile path: at each grid time, the univariate quantile of the
// k path values there.
inline std::vector<double> pointwise_path_quantile(const PathSet& p, const AlphaVector& alpha) {
  p.validate();
  alpha.validate();
  const std::size_t m = p.grid.size();
  std::vector<double> out(m);
  std::vector<double> column(p.paths.size());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < p.paths.size(); ++i) column[i] = p.paths[i][j];
    std::sort(column.begin(), column.end());
    out[j] = detail::quantile_of_sorted(column, alpha.at(j, m));
  }
  return out;
}

}  // namespace qoe

#endif  // QOE_QUANTILE_CORE_HPP
