#ifndef COVPOSE_COMMON_HPP
#define COVPOSE_COMMON_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace covpose {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Error classes surfaced to the CLI as "ERROR <code>: message".
enum class ErrorCode {
  InvalidInput,
  RankDeficient,
  NotPositiveDefinite,
  DegenerateRotation,
  Overflow,
  ConfigError,
  DivergenceDetected,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

bool all_finite(const Mat& m);

// Symmetric part (A + A^T)/2.
inline Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

// Deterministic random source. All draws are derived from the mt19937_64
// stream with fixed arithmetic so that sequences are reproducible bit-for-bit
// and the full state is the engine state (no hidden distribution caches).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one value per call (the spare is discarded).
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();  // rejection kills modulo bias
    return x % n;
  }

  // Independent per-item stream: parallel generation over items must equal
  // sequential generation, so each item gets its own derived seed.
  Rng derive(std::uint64_t index) const {
    std::uint64_t h = seed_ ^ 0x9e3779b97f4a7c15ULL;
    h = (h ^ (index * 0xff51afd7ed558ccdULL)) * 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return Rng(h);
  }

  void save(std::ostream& os) const { os << engine_; }
  void load(std::istream& is) { is >> engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace covpose

#endif  // COVPOSE_COMMON_HPP
