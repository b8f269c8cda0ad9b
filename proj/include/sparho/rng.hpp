#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace sparho {

/// splitmix64 finalizer. Stateless; used to derive stream seeds by index so
/// that parallel workers obtain identical streams regardless of scheduling.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for the stream identified by (master, cell, run).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell = 0,
                                 std::uint64_t run = 0) {
  return mix64(mix64(master ^ mix64(cell ^ 0x8e9fbc7a605dd2c3ULL)) ^
               mix64(run ^ 0x2545f4914f6cdd1dULL));
}

/// Deterministic random stream.
///
/// Wraps std::mt19937_64 (the engine itself is fully specified by the
/// standard) with hand-rolled variate transforms; the std:: distribution
/// classes are implementation-defined and would not give bit-identical
/// streams across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform double in [0, 1), 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. Consumes exactly two engine draws.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in {0, ..., n-1}; unbiased via rejection.
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  /// Index sampled from a probability vector. The vector is assumed
  /// normalized; any residual mass from rounding goes to the last index.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
    const double u = uniform();
    double cum = 0.0;
    const Eigen::Index n = probs.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sparho
