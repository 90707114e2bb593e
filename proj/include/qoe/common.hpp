#ifndef QOE_COMMON_HPP
#define QOE_COMMON_HPP

// Shared small utilities: argument checking, finite-value validation,
// compensated summation, and a few numeric helpers used across the library.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qoe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// All argument-contract violations throw invalid_argument with a message
// naming the offending quantity; numerical non-convergence is reported via
// result flags, never exceptions.
[[noreturn]] inline void fail_arg(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail_arg(msg);
}

// Configuration errors (bad experiment configs, inadmissible rate choices)
// are distinguished from plain argument errors so the CLI can map them to a
// dedicated exit code.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require_config(bool cond, const std::string& msg) {
  if (!cond) throw config_error(msg);
}

inline bool is_finite(double x) { return std::isfinite(x); }

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_finite(const std::vector<double>& xs, const char* what) {
  for (double x : xs)
    if (!std::isfinite(x)) fail_arg(std::string(what) + ": non-finite entry");
}

// Round values that are within a tiny relative band of an integer onto that
// integer. Needed wherever k*alpha drives floor/ceil logic: alpha = 3/10 is
// not representable, so 10*alpha = 2.9999999999999996 must still count as 3.
inline double snap_to_integer(double x, double rel_tol = 64.0) {
  const double r = std::round(x);
  const double eps = std::numeric_limits<double>::epsilon();
  if (std::abs(x - r) <= rel_tol * eps * std::max(1.0, std::abs(x))) return r;
  return x;
}

// Kahan-Babuska compensated accumulator; used where many small terms of
// similar magnitude are summed (Monte Carlo moments, numeric Hessians).
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sqr(double x) { return x * x; }

}  // namespace qoe

#endif  // QOE_COMMON_HPP
