#ifndef QOE_TESTS_PROPERTY_SUITES_HPP
#define QOE_TESTS_PROPERTY_SUITES_HPP

// Randomized property suites shared by the unit tests and the acceptance
// runner. Each suite runs `cases` independent random instances and counts
// violations of an exact inequality (up to explicit floating-point rounding
// slack, stated per suite).

#include <algorithm>
#include <cstddef>
#include <string>
#include <numbers>
#include <vector>

#include "qoe/geometry.hpp"
#include "qoe/quantile_core.hpp"
#include "qoe/rng.hpp"

namespace qoe_props {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t violations = 0;
  double worst_slack = 0.0;  // most negative margin seen (>= 0 means clean)

  void record(bool ok, double margin) {
    ++cases;
    if (!ok) ++violations;
    worst_slack = std::min(worst_slack, margin);
  }
};

namespace detail {

inline std::vector<double> random_values(qoe::RngStream& rng, std::size_t k, double scale) {
  std::vector<double> x(k);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rounding_slack(double magnitude) {
  return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, magnitude);
}

}  // namespace detail

// |q_a(x) - q_a(y)| <= max_j |x_j - y_j| for the midpoint quantile.
inline SuiteResult univariate_lipschitz(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "univariate_lipschitz";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_below(50));
    const double scale = std::exp(2.0 * rng.uniform01() - 1.0);
    const auto x = detail::random_values(rng, k, scale);
    auto y = x;
    for (double& v : y) v += 0.5 * scale * rng.normal();
    const double alpha = 0.02 + 0.96 * rng.uniform01();
    const double lhs = std::abs(qoe::univariate_quantile(x, alpha) -
                                qoe::univariate_quantile(y, alpha));
    const double rhs = detail::max_abs_diff(x, y);
    const double margin = rhs + detail::rounding_slack(rhs) - lhs;
    res.record(margin >= 0.0, margin);
  }
  return res;
}

// Same bound for the lower quantile.
inline SuiteResult univariate_lower_lipschitz(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "univariate_lower_lipschitz";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_below(50));
    const double scale = std::exp(2.0 * rng.uniform01() - 1.0);
    const auto x = detail::random_values(rng, k, scale);
    auto y = x;
    for (double& v : y) v += 0.5 * scale * rng.normal();
    const double alpha = 0.02 + 0.96 * rng.uniform01();
    const double lhs = std::abs(qoe::univariate_quantile_lower(x, alpha) -
                                qoe::univariate_quantile_lower(y, alpha));
    const double rhs = detail::max_abs_diff(x, y);
    const double margin = rhs + detail::rounding_slack(rhs) - lhs;
    res.record(margin >= 0.0, margin);
  }
  return res;
}

// q_a(x) nondecreasing in a for fixed x (exact: monotone rank selection).
inline SuiteResult univariate_ordering(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "univariate_ordering";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_below(50));
    const auto x = detail::random_values(rng, k, 1.0);
    double a1 = 0.02 + 0.96 * rng.uniform01();
    double a2 = 0.02 + 0.96 * rng.uniform01();
    if (a1 > a2) std::swap(a1, a2);
    const double margin = qoe::univariate_quantile(x, a2) - qoe::univariate_quantile(x, a1);
    res.record(margin >= 0.0, margin);
  }
  return res;
}

// q_a(c(x - s)) = c(q_a(x) - s) for c >= 0.
inline SuiteResult univariate_equivariance(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "univariate_equivariance";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_below(50));
    const auto x = detail::random_values(rng, k, 1.0);
    const double scale_c = 3.0 * rng.uniform01();
    const double shift = 2.0 * rng.normal();
    const double alpha = 0.02 + 0.96 * rng.uniform01();
    std::vector<double> tx(k);
    for (std::size_t i = 0; i < k; ++i) tx[i] = scale_c * (x[i] - shift);
    const double lhs = qoe::univariate_quantile(tx, alpha);
    const double rhs = scale_c * (qoe::univariate_quantile(x, alpha) - shift);
    const double tol =
        detail::rounding_slack(std::abs(rhs) + scale_c * (1.0 + std::abs(shift)));
    const double margin = tol - std::abs(lhs - rhs);
    res.record(margin >= 0.0, margin);
  }
  return res;
}

// ||Q(x_1..x_k) - Q(z_1..z_k)||_2 <= sqrt(sum_i ||x_i - z_i||_2^2).
inline SuiteResult componentwise_hilbert_lipschitz(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "componentwise_hilbert_lipschitz";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_below(20));
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform_below(5));
    qoe::PointSet x, z;
    double sumsq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      qoe::Vec a(static_cast<Eigen::Index>(d)), b(static_cast<Eigen::Index>(d));
      for (Eigen::Index l = 0; l < a.size(); ++l) {
        a(l) = rng.normal();
        b(l) = a(l) + 0.5 * rng.normal();
      }
      sumsq += (a - b).squaredNorm();
      x.points.push_back(a);
      z.points.push_back(b);
    }
    const double alpha = 0.02 + 0.96 * rng.uniform01();
    const qoe::AlphaVector av{{alpha}};
    const double lhs =
        (qoe::componentwise_quantile(x, av) - qoe::componentwise_quantile(z, av)).norm();
    const double rhs = std::sqrt(sumsq);
    const double margin = rhs + detail::rounding_slack(rhs) - lhs;
    res.record(margin >= 0.0, margin);
  }
  return res;
}

// sup_t |Q(f)(t) - Q(g)(t)| <= max_i sup_t |f_i(t) - g_i(t)|.
inline SuiteResult path_supnorm_lipschitz(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "path_supnorm_lipschitz";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_below(15));
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform_below(15));
    qoe::PathSet f, g;
    for (std::size_t j = 0; j < m; ++j)
      f.grid.push_back(static_cast<double>(j + 1) + rng.uniform01());
    std::sort(f.grid.begin(), f.grid.end());
    g.grid = f.grid;
    double max_sup = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> a(m), b(m);
      double sup = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        a[j] = rng.normal();
        b[j] = a[j] + 0.3 * rng.normal();
        sup = std::max(sup, std::abs(a[j] - b[j]));
      }
      max_sup = std::max(max_sup, sup);
      f.paths.push_back(a);
      g.paths.push_back(b);
    }
    const double alpha = 0.02 + 0.96 * rng.uniform01();
    const qoe::AlphaVector av{{alpha}};
    const auto qf = qoe::pointwise_path_quantile(f, av);
    const auto qg = qoe::pointwise_path_quantile(g, av);
    const double lhs = detail::max_abs_diff(qf, qg);
    const double margin = max_sup + detail::rounding_slack(max_sup) - lhs;
    res.record(margin >= 0.0, margin);
  }
  return res;
}

// Collinear point sets: the geometric quantile equals q_alpha of the line
// projections (any parametrization of the line gives the same point).
inline SuiteResult collinear_fallback_agreement(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "collinear_fallback_agreement";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform_below(15));
    const std::size_t d = 2 + static_cast<std::size_t>(rng.uniform_below(2));
    qoe::Vec origin(static_cast<Eigen::Index>(d)), h(static_cast<Eigen::Index>(d));
    for (Eigen::Index l = 0; l < origin.size(); ++l) {
      origin(l) = rng.normal();
      h(l) = rng.normal();
    }
    h.normalize();
    qoe::PointSet p;
    std::vector<double> coords(k);
    for (std::size_t i = 0; i < k; ++i) {
      coords[i] = 2.0 * rng.normal();
      p.points.push_back(origin + coords[i] * h);
    }
    // Draw u parallel to the line, where the solver must take the
    // line-quantile path: mix signed off-lattice magnitudes with exact
    // exceptional-set values ||u|| = 1 - 2j/k, where the canonical averaged
    // selection applies. (Off-line u instead pulls the minimizer off the
    // line; that branch is covered by the solver oracle and unit tests.)
    double s = 0.0;
    if (rng.uniform01() < 0.3) {
      const std::size_t j = 1 + static_cast<std::size_t>(rng.uniform_below(k / 2));
      s = 1.0 - 2.0 * static_cast<double>(j) / static_cast<double>(k);
      if (rng.uniform01() < 0.5) s = -s;
    } else {
      s = 0.8 * (2.0 * rng.uniform01() - 1.0);
    }
    const qoe::Vec u = s * h;

    const auto sol = qoe::geometric_quantile(p, u);
    double scale = 1.0;
    for (double v : coords) scale = std::max(scale, std::abs(v));
    bool ok = sol.status == qoe::GeoStatus::CollinearFallback;
    double margin = ok ? 0.0 : -1.0;
    if (ok) {
      // Independent computation in both line parametrizations (h and -h);
      // flipping the direction maps alpha to 1 - alpha and must return the
      // same point in space.
      for (const double sign : {1.0, -1.0}) {
        const qoe::Vec hs = sign * h;
        std::vector<double> cs(k);
        for (std::size_t i = 0; i < k; ++i) cs[i] = (p.points[i] - origin).dot(hs);
        const double alpha = 0.5 * (u.dot(hs) + 1.0);
        const qoe::Vec expected = origin + qoe::univariate_quantile(cs, alpha) * hs;
        const double err = (sol.point - expected).norm();
        const double tol = 1e-9 * scale;
        if (err > tol) ok = false;
        margin = std::min(margin, tol - err);
      }
    }
    res.record(ok, margin);
  }
  return res;
}

// geometric_quantile(c(x - s), u) = c(geometric_quantile(x, u) - s), c >= 0.
inline SuiteResult geometric_equivariance(std::uint64_t seed, std::size_t cases) {
  SuiteResult res;
  res.name = "geometric_equivariance";
  for (std::size_t c = 0; c < cases; ++c) {
    qoe::RngStream rng(seed, c);
    const std::size_t k = 3 + static_cast<std::size_t>(rng.uniform_below(8));
    qoe::PointSet p;
    for (std::size_t i = 0; i < k; ++i) {
      qoe::Vec x(2);
      x << rng.normal(), rng.normal();
      p.points.push_back(x);
    }
    const double phi = 2.0 * std::numbers::pi * rng.uniform01();
    const double r = 0.8 * rng.uniform01();
    qoe::Vec u(2);
    u << r * std::cos(phi), r * std::sin(phi);
    const double scale_c = 0.1 + 2.9 * rng.uniform01();
    qoe::Vec shift(2);
    shift << rng.normal(), rng.normal();

    qoe::PointSet q;
    for (const qoe::Vec& x : p.points) q.points.push_back(scale_c * (x - shift));
    const qoe::Vec a = qoe::geometric_quantile(q, u).point;
    const qoe::Vec b = scale_c * (qoe::geometric_quantile(p, u).point - shift);
    const double err = (a - b).norm();
    const double tol = 1e-6 * (1.0 + scale_c);
    res.record(err <= tol, tol - err);
  }
  return res;
}

inline std::vector<SuiteResult> run_all_property_suites(std::uint64_t seed,
                                                        std::size_t cases) {
  return {univariate_lipschitz(seed, cases),
          univariate_lower_lipschitz(seed, cases),
          univariate_ordering(seed, cases),
          univariate_equivariance(seed, cases),
          componentwise_hilbert_lipschitz(seed, cases),
          path_supnorm_lipschitz(seed, cases),
          collinear_fallback_agreement(seed, cases),
          geometric_equivariance(seed, cases)};
}

}  // namespace qoe_props

#endif  // QOE_TESTS_PROPERTY_SUITES_HPP
