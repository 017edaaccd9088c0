#pragma once

#include <cstdint>
#include <random>

#include "straw/common.hpp"

namespace straw {

// Deterministic RNG. All sampling used anywhere in the library goes through
// this class so that a fixed (seed, stream) pair reproduces runs bit-exactly.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : gen_(mix(seed + 0x9e3779b97f4a7c15ull * (stream + 1))) {}

  uint64_t raw() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, no caching: two raw draws per sample, reproducible.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform over {0, ..., n-1}.
  uint64_t uniform_int(uint64_t n) {
    STRAW_CHECK(n > 0, "uniform_int needs n > 0");
    return gen_() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double log_uniform(double lo, double hi) {
    STRAW_CHECK(lo > 0 && hi > lo, "log_uniform needs 0 < lo < hi");
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Samples an index from a probability vector. The vector must sum to 1
  // within tol; anything further off is a contract violation.
  template <class T>
  int categorical(const T* p, size_t n, double tol = 1e-6) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      STRAW_CHECK(p[i] >= T(0), "categorical: negative probability");
      sum += static_cast<double>(p[i]);
    }
    STRAW_CHECK(std::abs(sum - 1.0) <= tol, "categorical: probabilities do not sum to 1");
    double u = uniform() * sum;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      acc += static_cast<double>(p[i]);
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
  }

 private:
  static uint64_t mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }
  std::mt19937_64 gen_;
};

}  // namespace straw
