#ifndef QOE_RNG_HPP
#define QOE_RNG_HPP

// Deterministic, splittable random number generation.
//
// Experiments derive one independent stream per replication from
// (master seed, stream index) with a splitmix64 key schedule feeding a
// xoshiro256++ state. Results are therefore independent of thread count
// and of the order in which replications execute.
//
// splitmix64: Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators" (fixed-increment variant, Vigna's public-domain reference).
// xoshiro256++: Blackman & Vigna, public-domain reference implementation.

#include <array>
#include <cmath>
#include <cstdint>

namespace qoe {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// One random stream, cheap to construct per replication.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    // Decorrelate (seed, stream) pairs through two splitmix64 rounds before
    // filling the xoshiro state; distinct keys give distinct state vectors.
    std::uint64_t key = seed;
    (void)splitmix64_next(key);
    key += 0x9E3779B97F4A7C15ULL * (stream + 1);
    for (auto& word : state_) word = splitmix64_next(key);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; second value of each pair is cached so
  // one draw consumes exactly one or zero uniform pairs deterministically.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard the log
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  // Student-t with 3 degrees of freedom: N / sqrt(chi^2_3 / 3), built from
  // exactly four normal draws so stream consumption is fixed.
  double student_t3() {
    const double z = normal();
    const double a = normal();
    const double b = normal();
    const double c = normal();
    const double chi2 = a * a + b * b + c * c;
    return z / std::sqrt(chi2 / 3.0);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace qoe

#endif  // QOE_RNG_HPP
