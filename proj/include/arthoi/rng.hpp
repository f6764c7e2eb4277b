// Seeded RNG with hand-rolled distributions so streams are identical across
// standard libraries (std::normal_distribution is implementation-defined).

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace arthoi {

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] via rejection-free modulo of a wide draw.
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  /// Box-Muller normal; consumes exactly two draws per call.
  double normal(double mu = 0.0, double sigma = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(2.0 * M_PI * u2);
  }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace arthoi
