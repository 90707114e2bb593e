#ifndef QOE_GEOMETRY_HPP
#define QOE_GEOMETRY_HPP

// Geometric (spatial) quantile solver in R^d.
//
// The geometric quantile of points x_1..x_k with direction u (||u|| < 1)
// minimizes sum_i ||x_i - y|| + <u, x_i - y>. Away from data points the
// first-order condition is sum_i (x_i - y)/||x_i - y|| + k u = 0, solved by a
// Weiszfeld fixed point augmented with the k*u term. Iterates landing on a
// data point are handled by an exact subdifferential (anchor) test with a
// Vardi-Zhang style escape when the point is not optimal. Collinear point
// sets fall back to the univariate quantile along the fitted line. The
// solution's barycentric weight representation (k data weights plus one
// weight on u) is returned alongside the point.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "qoe/common.hpp"
#include "qoe/quantile_core.hpp"

namespace qoe {

// Fitted straight line through a (nearly) collinear point set.
struct LineFit {
  Vec origin;                       // centroid of the points
  Vec direction;                    // unit vector, first nonzero coordinate positive
  std::vector<double> coordinates;  // signed projections of the points
};

enum class GeoStatus { Interior, Anchored, CollinearFallback };

struct GeoQuantileResult {
  Vec point;
  std::vector<double> weights;  // k+1 entries on the simplex; last belongs to u
  double residual = 0.0;        // first-order condition norm (or anchor surplus)
  long iterations = 0;
  GeoStatus status = GeoStatus::Interior;
  int anchor_index = -1;         // data point index when status == Anchored
  bool nonunique_fallback = false;  // line fallback hit the quantile lattice
  bool converged = true;
};

struct SolverOptions {
  double collinearity_tol = 1e-10;  // relative: triangle-area sum vs scale^3
  double anchor_tol = 1e-12;        // relative to scale: snap-to-data radius
  double escape_step = 1e-6;        // relative to scale: restart displacement
  double step_tol = 1e-12;          // relative to scale: iterate movement
  double residual_tol = 1e-10;      // relative to k: first-order residual
  double parallel_tol = 1e-12;      // absolute: off-line component of u treated as zero
  long max_iterations = 100000;
};

namespace detail {

struct PairwiseScale {
  double scale = 0.0;  // max pairwise distance
  std::size_t a = 0, b = 0;
};

inline PairwiseScale pairwise_scale(const PointSet& p) {
  PairwiseScale r;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      const double d = (p.points[i] - p.points[j]).norm();
      if (d > r.scale) {
        r.scale = d;
        r.a = i;
        r.b = j;
      }
    }
  return r;
}

inline Vec centroid(const PointSet& p) {
  Vec c = Vec::Zero(p.points.front().size());
  for (const Vec& x : p.points) c += x;
  return c / static_cast<double>(p.size());
}

// Fix the sign convention: first nonzero coordinate of the direction is
// positive, so the scalar parametrization of the line is reproducible.
inline void fix_direction_sign(Vec& dir) {
  for (Eigen::Index c = 0; c < dir.size(); ++c) {
    if (dir(c) != 0.0) {
      if (dir(c) < 0.0) dir = -dir;
      return;
    }
  }
}

inline LineFit make_line_fit(const PointSet& p, const PairwiseScale& ps) {
  LineFit fit;
  fit.origin = centroid(p);
  if (ps.scale > 0.0) {
    fit.direction = (p.points[ps.b] - p.points[ps.a]) / ps.scale;
  } else {
    fit.direction = Vec::Zero(p.points.front().size());
    fit.direction(0) = 1.0;  // degenerate set: any direction represents it
  }
  fix_direction_sign(fit.direction);
  fit.coordinates.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    fit.coordinates[i] = (p.points[i] - fit.origin).dot(fit.direction);
  return fit;
}

// Sum of areas of all triangles with vertices in the point set, compared
// against tol * scale^3 (Heron-type exact-zero test made scale-relative).
// Early exit once the partial sum already exceeds the threshold.
inline bool triangle_area_sum_below(const PointSet& p, double threshold) {
  const std::size_t k = p.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const Vec u = p.points[j] - p.points[i];
      const double base = u.norm();
      if (base == 0.0) continue;  // coincident pair spans no triangle
      const Vec uhat = u / base;
      for (std::size_t l = j + 1; l < k; ++l) {
        // Height of the third vertex over the base edge, computed by
        // removing the projection first; the difference is taken
        // componentwise, so the rounding error stays O(eps * scale^2)
        // instead of the O(sqrt(eps) * scale^2) of the Gram-determinant
        // form, which cannot resolve thin triangles.
        const Vec v = p.points[l] - p.points[i];
        const double height = (v - v.dot(uhat) * uhat).norm();
        sum += 0.5 * base * height;
        if (sum > threshold) return false;
      }
    }
  return true;
}

}  // namespace detail

// Returns a LineFit when the point set is collinear up to the relative
// tolerance (sum of all triangle areas <= tol * scale^3); k <= 2 is always
// collinear.
inline std::optional<LineFit> collinearity_test(const PointSet& p, double tol = 1e-10) {
  p.validate();
  const auto ps = detail::pairwise_scale(p);
  if (p.size() <= 2 || ps.scale == 0.0) return detail::make_line_fit(p, ps);
  const double threshold = tol * ps.scale * ps.scale * ps.scale;
  if (detail::triangle_area_sum_below(p, threshold)) return detail::make_line_fit(p, ps);
  return std::nullopt;
}

// The geometric quantile is unique unless the points are collinear and
// ||u|| belongs to the exception lattice {1 - 2j/k, j = 1..floor(k/2)}.
inline bool uniqueness_predicate(std::size_t k, double u_norm, bool collinear) {
  require(k >= 1, "uniqueness_predicate: k must be >= 1");
  require(u_norm >= 0.0 && u_norm < 1.0, "uniqueness_predicate: ||u|| must lie in [0,1)");
  if (!collinear) return true;
  const double tol = 32.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(k);
  for (std::size_t j = 1; j <= k / 2; ++j) {
    const double lattice = 1.0 - 2.0 * static_cast<double>(j) / static_cast<double>(k);
    if (std::abs(u_norm - lattice) <= tol) return false;
  }
  return true;
}

// First-order residual ||sum_i (x_i - y)/||x_i - y|| + k u||; undefined on
// data points (use the anchor test there).
inline double first_order_residual(const PointSet& p, const Vec& y, const Vec& u) {
  p.validate();
  require(all_finite(y) && all_finite(u), "first_order_residual: non-finite input");
  require(y.size() == p.points.front().size() && u.size() == y.size(),
          "first_order_residual: dimension mismatch");
  Vec g = static_cast<double>(p.size()) * u;
  for (const Vec& x : p.points) {
    const Vec diff = x - y;
    const double d = diff.norm();
    require(d > 0.0, "first_order_residual: y coincides with a data point");
    g += diff / d;
  }
  return g.norm();
}

namespace detail {

// Subdifferential test at data point x_j with multiplicity m: x_j is the
// quantile iff the surplus R = sum_{far} (x_i - x_j)/||x_i - x_j|| + k u
// satisfies ||R|| <= m. Returns (R, m).
inline std::pair<Vec, std::size_t> anchor_surplus(const PointSet& p, std::size_t j,
                                                  const Vec& u, double coincide_tol) {
  const Vec& xj = p.points[j];
  Vec r = static_cast<double>(p.size()) * u;
  std::size_t multiplicity = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec diff = p.points[i] - xj;
    const double d = diff.norm();
    if (d <= coincide_tol)
      ++multiplicity;
    else
      r += diff / d;
  }
  return {r, multiplicity};
}

inline GeoQuantileResult anchored_result(const PointSet& p, std::size_t j, const Vec& r,
                                         std::size_t multiplicity, double coincide_tol,
                                         long iterations) {
  GeoQuantileResult res;
  res.point = p.points[j];
  res.status = GeoStatus::Anchored;
  res.anchor_index = static_cast<int>(j);
  res.iterations = iterations;
  res.residual = std::max(0.0, r.norm() - static_cast<double>(multiplicity));
  res.weights.assign(p.size() + 1, 0.0);
  const Vec& xj = p.points[j];
  for (std::size_t i = 0; i < p.size(); ++i)
    if ((p.points[i] - xj).norm() <= coincide_tol)
      res.weights[i] = 1.0 / static_cast<double>(multiplicity);
  return res;
}

inline GeoQuantileResult collinear_fallback(const PointSet& p, const LineFit& fit,
                                            const Vec& u) {
  const std::size_t k = p.size();
  const double u_line = u.dot(fit.direction);
  const double alpha = 0.5 * (u_line + 1.0);
  // Rank the projections with their point indices (ties by index) so the
  // returned weights identify the contributing order statistics.
  std::vector<std::pair<double, std::size_t>> ranked(k);
  for (std::size_t i = 0; i < k; ++i) ranked[i] = {fit.coordinates[i], i};
  std::sort(ranked.begin(), ranked.end());
  const auto [i1, i2] = detail::quantile_ranks(k, alpha);
  const double q = 0.5 * (ranked[i1 - 1].first + ranked[i2 - 1].first);

  GeoQuantileResult res;
  res.point = fit.origin + q * fit.direction;
  res.status = GeoStatus::CollinearFallback;
  res.nonunique_fallback = detail::alpha_on_lattice(k, alpha);
  res.weights.assign(k + 1, 0.0);
  res.weights[ranked[i1 - 1].second] += 0.5;
  res.weights[ranked[i2 - 1].second] += 0.5;
  return res;
}

}  // namespace detail

// Solve for the geometric quantile. Collinear sets (including k <= 2) route
// through the line fallback -- project, take the univariate quantile at
// alpha = (<u, direction> + 1)/2, map back -- when ||u|| lies on the
// exceptional set {1 - 2j/k} or u is parallel to the line; any other u pulls
// the unique minimizer off the line, which the iteration finds.
inline GeoQuantileResult geometric_quantile(const PointSet& p, const Vec& u,
                                            const SolverOptions& opts = {}) {
  p.validate();
  require(all_finite(u), "geometric_quantile: non-finite direction");
  require(u.size() == p.points.front().size(), "geometric_quantile: dimension mismatch");
  require(u.norm() < 1.0, "geometric_quantile: ||u|| must be < 1");
  const std::size_t k = p.size();

  if (k == 1) {
    // A single point minimizes the objective for every u: |<u,z>| < ||z||.
    GeoQuantileResult res;
    res.point = p.points.front();
    res.status = GeoStatus::Anchored;
    res.anchor_index = 0;
    res.weights = {1.0, 0.0};
    return res;
  }

  const auto ps = detail::pairwise_scale(p);
  const bool collinear =
      ps.scale == 0.0 || p.size() <= 2 ||
      detail::triangle_area_sum_below(
          p, opts.collinearity_tol * ps.scale * ps.scale * ps.scale);
  if (collinear) {
    // All points coincide: that point minimizes the objective for every u.
    if (ps.scale == 0.0)
      return detail::collinear_fallback(p, detail::make_line_fit(p, ps), u);
    const auto fit = detail::make_line_fit(p, ps);
    const Vec off_line = u - u.dot(fit.direction) * fit.direction;
    // Use the univariate quantile of the line coordinates in two cases:
    // (a) ||u|| sits on the exceptional set {1 - 2j/k}, where the minimizing
    // set can be a segment of the line and a canonical selection is needed;
    // (b) u is (numerically) parallel to the line, where the unique minimizer
    // is an order statistic of the projections, so the line quantile is
    // exact. Any other u pulls the unique minimizer off the line, so fall
    // through to the iteration.
    if (!uniqueness_predicate(k, u.norm(), true) ||
        off_line.norm() <= opts.parallel_tol)
      return detail::collinear_fallback(p, fit, u);
  }

  const double scale = ps.scale;
  const double coincide_tol = opts.anchor_tol * scale;
  const double kd = static_cast<double>(k);

  Vec y = detail::centroid(p);
  std::vector<double> dist(k);
  GeoQuantileResult res;
  res.weights.assign(k + 1, 0.0);

  long iter = 0;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  while (iter < opts.max_iterations) {
    ++iter;
    std::size_t jmin = 0;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      dist[i] = (p.points[i] - y).norm();
      if (dist[i] < dmin) {
        dmin = dist[i];
        jmin = i;
      }
    }

    if (dmin <= coincide_tol) {
      auto [r, multiplicity] = detail::anchor_surplus(p, jmin, u, coincide_tol);
      const double md = static_cast<double>(multiplicity);
      if (r.norm() <= md * (1.0 + 1e-12) + 1e-12)
        return detail::anchored_result(p, jmin, r, multiplicity, coincide_tol, iter);
      // Not optimal: restart just off the data point along the descent
      // (normalized surplus) direction.
      y = p.points[jmin] + (opts.escape_step * scale / r.norm()) * r;
      continue;
    }

    Vec grad_sum = kd * u;  // residual vector sum (x_i - y)/d_i + k u
    Vec weighted = Vec::Zero(y.size());
    double inv_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const Vec diff = p.points[i] - y;
      grad_sum += diff / dist[i];
      weighted += p.points[i] / dist[i];
      inv_sum += 1.0 / dist[i];
    }
    residual = grad_sum.norm();
    if (residual <= opts.residual_tol * kd) {
      converged = true;
      break;
    }
    const Vec y_next = (weighted + kd * u) / inv_sum;
    const double step = (y_next - y).norm();
    y = y_next;
    if (step <= opts.step_tol * scale) {
      converged = true;
      // Residual at the final iterate, for reporting.
      double d_chk = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i) d_chk = std::min(d_chk, (p.points[i] - y).norm());
      if (d_chk > 0.0) residual = first_order_residual(p, y, u);
      break;
    }
  }

  // Final anchor check.  When the minimizer sits at a data point the
  // iteration only approaches it geometrically, so the step-size exit can
  // leave y just outside the snap radius.  The subdifferential condition
  // ||R|| <= multiplicity certifies global optimality of the data point for
  // the convex objective, so it may be tested regardless of the current
  // distance; snap whenever it holds (or once inside the snap radius).
  {
    std::size_t jmin = 0;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double d = (p.points[i] - y).norm();
      if (d < dmin) {
        dmin = d;
        jmin = i;
      }
    }
    auto [r, multiplicity] = detail::anchor_surplus(p, jmin, u, coincide_tol);
    const double md = static_cast<double>(multiplicity);
    if (dmin <= coincide_tol || r.norm() <= md * (1.0 + 1e-12) + 1e-12)
      return detail::anchored_result(p, jmin, r, multiplicity, coincide_tol, iter);
  }

  res.point = y;
  res.status = GeoStatus::Interior;
  res.iterations = iter;
  res.converged = converged;
  res.residual = residual;
  double inv_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) inv_sum += 1.0 / (p.points[i] - y).norm();
  const double denom = inv_sum + kd;
  for (std::size_t i = 0; i < k; ++i)
    res.weights[i] = (1.0 / (p.points[i] - y).norm()) / denom;
  res.weights[k] = kd / denom;
  return res;
}

// Result of the contamination-absorbing parameter adjustment.
struct AdjustedParameter {
  Vec v;
  std::size_t p = 0;           // number of modified leading points
  std::size_t coincident = 0;  // modified points equal to x* (within tolerance)
  bool v_norm_ok = true;       // ||v|| < 1 held numerically (never renormalized)
};

// Given x* = geometric quantile of the original points with direction u, and
// a modification of the first p points, returns the direction v for which x*
// is a geometric quantile of the modified points:
//   v = u                                   if p = 0,
//   v = (S u - (2p/k) G) / (2p + S)         otherwise,
// where S counts modified points coinciding with x* and G sums the unit
// vectors (x~_j - x*)/||x~_j - x*|| over the non-coincident modified set
// (zero subgradient chosen at coincident points). Guarantees
// ||v - u|| <= 2p/k; requires p < k(1 - ||u||)/2.
inline AdjustedParameter adjusted_parameter(const PointSet& original,
                                            const PointSet& modified, const Vec& x_star,
                                            const Vec& u) {
  original.validate();
  modified.validate();
  require(original.size() == modified.size(), "adjusted_parameter: size mismatch");
  require(original.dim() == modified.dim(), "adjusted_parameter: dimension mismatch");
  require(all_finite(x_star) && all_finite(u), "adjusted_parameter: non-finite input");
  require(u.norm() < 1.0, "adjusted_parameter: ||u|| must be < 1");
  const std::size_t k = original.size();

  std::size_t p = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (original.points[i] != modified.points[i]) p = i + 1;

  AdjustedParameter out;
  out.p = p;
  if (p == 0) {
    out.v = u;
    return out;
  }
  require(static_cast<double>(p) < 0.5 * static_cast<double>(k) * (1.0 - u.norm()),
          "adjusted_parameter: p must satisfy p < k(1-||u||)/2");

  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    scale = std::max(scale, (modified.points[i] - x_star).norm());
    for (std::size_t j = i + 1; j < k; ++j)
      scale = std::max(scale, (modified.points[i] - modified.points[j]).norm());
  }
  const double coincide_tol = 1e-12 * scale;

  Vec g_sum = Vec::Zero(x_star.size());
  std::size_t coincident = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const Vec diff = modified.points[i] - x_star;
    const double d = diff.norm();
    if (d <= coincide_tol)
      ++coincident;
    else
      g_sum += diff / d;
  }

  const double pd = static_cast<double>(p);
  const double sd = static_cast<double>(coincident);
  out.coincident = coincident;
  out.v = (sd * u - (2.0 * pd / static_cast<double>(k)) * g_sum) / (2.0 * pd + sd);
  out.v_norm_ok = out.v.norm() < 1.0;
  return out;
}

struct L1QuantileResult {
  Vec point;
  std::vector<std::uint8_t> nonunique;  // per-coordinate lattice flag
};

// Geometric quantile under the l1 norm: decomposes into per-coordinate
// univariate geometric quantiles, i.e. coordinate l is the univariate
// quantile at alpha_l = (u_l + 1)/2 (midpoint convention on the lattice,
// flagged per coordinate).
inline L1QuantileResult l1_geometric_quantile(const PointSet& p, const Vec& u) {
  p.validate();
  require(all_finite(u), "l1_geometric_quantile: non-finite direction");
  require(u.size() == p.points.front().size(), "l1_geometric_quantile: dimension mismatch");
  const auto d = static_cast<std::size_t>(p.dim());
  for (Eigen::Index l = 0; l < u.size(); ++l)
    require(std::abs(u(l)) < 1.0, "l1_geometric_quantile: every |u_l| must be < 1");

  L1QuantileResult res;
  res.point.resize(static_cast<Eigen::Index>(d));
  res.nonunique.assign(d, 0);
  std::vector<double> column(p.size());
  for (std::size_t l = 0; l < d; ++l) {
    for (std::size_t i = 0; i < p.size(); ++i)
      column[i] = p.points[i](static_cast<Eigen::Index>(l));
    const double alpha = 0.5 * (u(static_cast<Eigen::Index>(l)) + 1.0);
    std::sort(column.begin(), column.end());
    res.point(static_cast<Eigen::Index>(l)) = detail::quantile_of_sorted(column, alpha);
    res.nonunique[l] = detail::alpha_on_lattice(p.size(), alpha) ? 1 : 0;
  }
  return res;
}

// Objective value sum_i ||x_i - y|| + <u, x_i - y>, used by oracle tests.
inline double geo_objective(const PointSet& p, const Vec& y, const Vec& u) {
  double obj = 0.0;
  for (const Vec& x : p.points) obj += (x - y).norm() + u.dot(x - y);
  return obj;
}

}  // namespace qoe

#endif  // QOE_GEOMETRY_HPP
