#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace stabledyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr const char *kToolName = "stabledyn";
inline constexpr const char *kVersion = "0.1.0";

// Input file or schema problem (malformed CSV, bad JSON, wrong format tag).
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string &msg) : std::runtime_error(msg) {}
};

// Data fails a semantic requirement (dimension mismatch, non-monotone time,
// endpoint too far from target, non-SPD matrix).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string &msg) : std::runtime_error(msg) {}
};

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

// Deterministic RNG with hand-rolled variate generation. std::mt19937_64 output
// is identical on every platform; std::uniform_real_distribution and
// std::normal_distribution are not, so the mappings live here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second variate of each pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  // Uniform integer in [0, n) by rejection; unbiased.
  uint64_t uniform_int(uint64_t n) {
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stabledyn
