#ifndef QOE_ASYMPTOTICS_HPP
#define QOE_ASYMPTOTICS_HPP

// Closed-form asymptotic covariances and concentration bounds used as ground
// truth by the Monte Carlo harness:
//
//  * Sigma_alpha: covariance of the normalized component-wise
//    quantile-of-estimators, built from bivariate normal tail probabilities
//    and marginal densities of the limit law.
//  * ols_gamma: the same object specialized to the OLS example.
//  * brownian_qoe_cov: covariance function of the point-wise median of
//    Brownian paths.
//  * c_nu / psi / concentration_bound: displacement constant and binomial
//    KL-type tail bound for the geometric quantile under contamination.
//
// Scalar normal machinery (pdf/cdf/quantile) is erf-based; the quantile uses
// Acklam's rational approximation refined by one Halley step. Bivariate
// normal probabilities use the Drezner/Genz reduction to a one-dimensional
// correlation integral, evaluated by adaptive Gauss-Legendre quadrature.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qoe/common.hpp"

namespace qoe {

inline constexpr double kPi = 3.14159265358979323846;

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Inverse standard normal cdf. Acklam's approximation (~1e-9) followed by a
// Halley refinement against the erfc-based cdf brings it near machine
// precision across (0,1).
inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile: p must lie strictly in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step: f = cdf(x) - p, f' = pdf(x), f''/f' = -x.
  const double e = normal_cdf(x) - p;
  const double u = e / normal_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

// P(Z1 > 0, Z2 > 0) for standard bivariate normal with correlation rho.
inline double gaussian_orthant(double rho) {
  require(rho >= -1.0 && rho <= 1.0, "gaussian_orthant: |rho| must be <= 1");
  return 0.25 + std::asin(rho) / (2.0 * kPi);
}

namespace detail {

// Integrand of the Drezner/Genz correlation integral for the bivariate
// normal: exp(-(h^2 + k^2 - 2 h k sin t) / (2 cos^2 t)).
inline double bvn_integrand(double t, double h, double k) {
  const double s = std::sin(t);
  const double c2 = std::max(1.0 - s * s, 1e-300);
  return std::exp(-(h * h + k * k - 2.0 * h * k * s) / (2.0 * c2));
}

inline double gl15(double a, double b, double h, double k) {
  // 15-point Gauss-Legendre nodes/weights on [-1,1].
  static const double xg[] = {0.0000000000000000,  0.2011940939974345,
                              0.3941513470775634,  0.5709721726085388,
                              0.7244177313601701,  0.8482065834104272,
                              0.9372733924007060,  0.9879925180204854};
  static const double wg[] = {0.2025782419255613, 0.1984314853271116,
                              0.1861610000155622, 0.1662692058169939,
                              0.1395706779261543, 0.1071592204671719,
                              0.0703660474881081, 0.0307532419961173};
  const double mid = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  double sum = wg[0] * bvn_integrand(mid, h, k);
  for (int i = 1; i < 8; ++i) {
    const double dx = hw * xg[i];
    sum += wg[i] * (bvn_integrand(mid - dx, h, k) + bvn_integrand(mid + dx, h, k));
  }
  return sum * hw;
}

inline double adaptive_gl(double a, double b, double h, double k, double whole,
                          double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gl15(a, mid, h, k);
  const double right = gl15(mid, b, h, k);
  if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
  return adaptive_gl(a, mid, h, k, left, 0.5 * tol, depth - 1) +
         adaptive_gl(mid, b, h, k, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Upper-orthant probability P(X > h, Y > k) for standard bivariate normal
// with correlation rho, to absolute accuracy ~1e-12.
inline double bvn_upper(double h, double k, double rho) {
  require(rho >= -1.0 && rho <= 1.0, "bvn_upper: |rho| must be <= 1");
  require(std::isfinite(h) && std::isfinite(k), "bvn_upper: non-finite threshold");
  if (rho == 1.0) return normal_sf(std::max(h, k));
  if (rho == -1.0) return std::max(0.0, 1.0 - normal_cdf(h) - normal_cdf(k));
  if (rho == 0.0) return normal_sf(h) * normal_sf(k);
  const double upper = std::asin(rho);
  const double whole = detail::gl15(0.0, upper, h, k);
  const double integral = detail::adaptive_gl(0.0, upper, h, k, whole, 1e-13, 40);
  double p = normal_sf(h) * normal_sf(k) + integral / (2.0 * kPi);
  return std::clamp(p, 0.0, 1.0);
}

// Limit law of the normalized block estimates: a centered Gaussian vector
// with the given covariance, or Brownian motion restricted to a time grid
// (whose finite-dimensional covariance is min(t_i, t_j)).
struct LimitLaw {
  enum class Kind { GaussianVector, BrownianMotion };
  Kind kind = Kind::GaussianVector;
  Mat covariance;             // GaussianVector
  std::vector<double> times;  // BrownianMotion

  Mat effective_covariance() const {
    if (kind == Kind::GaussianVector) {
      require(covariance.rows() == covariance.cols(), "LimitLaw: covariance must be square");
      return covariance;
    }
    const auto m = static_cast<Eigen::Index>(times.size());
    require(m >= 1, "LimitLaw: empty time grid");
    for (Eigen::Index i = 0; i < m; ++i) {
      require(times[static_cast<std::size_t>(i)] > 0.0, "LimitLaw: times must be positive");
      if (i > 0)
        require(times[static_cast<std::size_t>(i)] > times[static_cast<std::size_t>(i - 1)],
                "LimitLaw: times must be increasing");
    }
    Mat cov(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        cov(i, j) = std::min(times[static_cast<std::size_t>(i)],
                             times[static_cast<std::size_t>(j)]);
    return cov;
  }
};

// Asymptotic covariance of the normalized component-wise QoE at levels
// alpha: entry (i,j) is
//   (P{Y_i > F_i^-1(a_i), Y_j > F_j^-1(a_j)} - (1-a_i)(1-a_j)) /
//   (f_i(F_i^-1(a_i)) * f_j(F_j^-1(a_j))).
// The diagonal reduces to a(1-a)/f^2; the median case uses the arcsine
// orthant identity, general levels the numerical bivariate integral.
inline Mat sigma_alpha(const LimitLaw& law, const std::vector<double>& alpha) {
  const Mat cov = law.effective_covariance();
  const Eigen::Index d = cov.rows();
  require(static_cast<Eigen::Index>(alpha.size()) == d || alpha.size() == 1,
          "sigma_alpha: alpha length must be 1 or match dimension");
  auto alpha_at = [&](Eigen::Index i) {
    return alpha.size() == 1 ? alpha.front() : alpha[static_cast<std::size_t>(i)];
  };

  std::vector<double> sd(static_cast<std::size_t>(d)), z(static_cast<std::size_t>(d)),
      dens(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const double a = alpha_at(i);
    require(a > 0.0 && a < 1.0, "sigma_alpha: alpha must lie strictly in (0,1)");
    const double var = cov(i, i);
    require(var > 0.0, "sigma_alpha: zero marginal variance gives zero density");
    const double s = std::sqrt(var);
    sd[static_cast<std::size_t>(i)] = s;
    z[static_cast<std::size_t>(i)] = normal_quantile(a);
    dens[static_cast<std::size_t>(i)] = normal_pdf(z[static_cast<std::size_t>(i)]) / s;
  }

  Mat out(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double ai = alpha_at(i);
    out(i, i) = ai * (1.0 - ai) / sqr(dens[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double aj = alpha_at(j);
      const double rho =
          cov(i, j) / (sd[static_cast<std::size_t>(i)] * sd[static_cast<std::size_t>(j)]);
      double joint;
      if (z[static_cast<std::size_t>(i)] == 0.0 && z[static_cast<std::size_t>(j)] == 0.0)
        joint = gaussian_orthant(rho);
      else
        joint = bvn_upper(z[static_cast<std::size_t>(i)], z[static_cast<std::size_t>(j)],
                          std::clamp(rho, -1.0, 1.0));
      out(i, j) = out(j, i) = (joint - (1.0 - ai) * (1.0 - aj)) /
                              (dens[static_cast<std::size_t>(i)] * dens[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

// Covariance target for the component-wise median of per-block OLS
// estimates. Diagonal: pi * sigma^2 * Exx_ii. Off-diagonal:
// 2 pi sigma^2 sqrt(Exx_ii Exx_jj) (orthant(rho_ij) - 1/4) with rho_ij the
// correlation induced by the design second-moment matrix.
inline Mat ols_gamma(const Mat& Exx, double sigma2) {
  require(Exx.rows() == Exx.cols(), "ols_gamma: Exx must be square");
  require(sigma2 > 0.0, "ols_gamma: sigma^2 must be positive");
  const Eigen::Index p = Exx.rows();
  for (Eigen::Index i = 0; i < p; ++i)
    require(Exx(i, i) > 0.0, "ols_gamma: Exx diagonal must be positive");
  Mat gamma(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    gamma(i, i) = kPi * sigma2 * Exx(i, i);
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double denom = std::sqrt(Exx(i, i) * Exx(j, j));
      const double rho = std::clamp(Exx(i, j) / denom, -1.0, 1.0);
      gamma(i, j) = gamma(j, i) =
          2.0 * kPi * sigma2 * denom * (gaussian_orthant(rho) - 0.25);
    }
  }
  return gamma;
}

// Covariance of the normalized point-wise median of Brownian paths:
// sqrt(s t) * atan(sqrt(s) / sqrt(t - s)) for s = min < t = max, and
// t * pi / 2 at equal times.
inline double brownian_qoe_cov(double ti, double tj) {
  require(ti > 0.0 && tj > 0.0, "brownian_qoe_cov: times must be positive");
  const double s = std::min(ti, tj);
  const double t = std::max(ti, tj);
  if (s == t) return t * kPi / 2.0;
  return std::sqrt(s * t) * std::atan(std::sqrt(s) / std::sqrt(t - s));
}

// Displacement constant C_nu = 2(1-nu) / (1 - 2 nu - ||u||).
inline double c_nu(double nu, double u_norm) {
  require(u_norm >= 0.0 && u_norm < 1.0, "c_nu: ||u|| must lie in [0,1)");
  require(nu > 0.0 && nu < 0.5 * (1.0 - u_norm),
          "c_nu: nu must lie in (0, (1-||u||)/2)");
  return 2.0 * (1.0 - nu) / (1.0 - 2.0 * nu - u_norm);
}

// Binomial KL-type rate psi(s;p) = (1-s) log((1-s)/(1-p)) + s log(s/p),
// defined for 0 < p <= s < 1/2 (0 at s = p). log1p keeps the s ~ p regime
// accurate.
inline double psi(double s, double p) {
  require(p > 0.0 && s < 0.5 && p <= s, "psi: need 0 < p <= s < 1/2");
  if (s == p) return 0.0;
  const double t1 = (1.0 - s) * std::log1p((p - s) / (1.0 - p));
  const double t2 = s * std::log1p((s - p) / p);
  return t1 + t2;
}

struct ConcentrationParams {
  double nu = 0.0;      // quantile displacement level
  double p = 0.0;       // per-block tail probability
  double tau = 0.0;     // fraction of adversarial blocks
  long k = 0;           // number of blocks
  double u_norm = 0.0;  // norm of the quantile direction

  void validate() const {
    require(u_norm >= 0.0 && u_norm < 1.0, "ConcentrationParams: ||u|| must lie in [0,1)");
    require(p > 0.0 && p < nu && nu < 0.5 * (1.0 - u_norm),
            "ConcentrationParams: need 0 < p < nu < (1-||u||)/2");
    const double tau_max = (nu - p) / (1.0 - p);
    require(tau >= 0.0 && tau <= tau_max + 1e-12,
            "ConcentrationParams: tau must lie in [0, (nu-p)/(1-p)]");
    require(k >= 0, "ConcentrationParams: k must be nonnegative");
  }
};

// Tail bound exp(-k (1-tau) psi((nu-tau)/(1-tau); p)); reduces to
// exp(-k psi(nu;p)) at tau = 0 and to 1 at k = 0.
inline double concentration_bound(const ConcentrationParams& cp) {
  cp.validate();
  if (cp.k == 0) return 1.0;
  const double s = std::max(cp.p, (cp.nu - cp.tau) / (1.0 - cp.tau));
  return std::exp(-static_cast<double>(cp.k) * (1.0 - cp.tau) * psi(s, cp.p));
}

}  // namespace qoe

#endif  // QOE_ASYMPTOTICS_HPP
