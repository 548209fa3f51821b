#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

// Deterministic randomness. The engine is std::mt19937_64 (whose output
// sequence is fully pinned by the standard), but every distribution
// transform is implemented here by hand because the standard library's
// distributions are implementation-defined and would break bit-level
// reproducibility of runs across toolchains.

namespace fedsim {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive seed derivation: hash_seed(a, b) != hash_seed(b, a).
inline uint64_t hash_seed(uint64_t a, uint64_t b) {
  return splitmix64(splitmix64(a) ^ (0x9e3779b97f4a7c15ULL + b));
}

inline uint64_t hash_seed(uint64_t a, uint64_t b, uint64_t c) {
  return hash_seed(hash_seed(a, b), c);
}

inline uint64_t hash_seed(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return hash_seed(hash_seed(a, b, c), d);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection sampling.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const uint64_t rej = (-n) % n;  // 2^64 mod n
    uint64_t x = next_u64();
    while (x < rej) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller. Uses two uniforms per value; the sine
  // branch is discarded to keep the draw count per call fixed.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(alpha, 1) by Marsaglia-Tsang squeeze, with the standard boost
  // for alpha < 1.
  double gamma(double alpha) {
    if (alpha <= 0.0)
      throw std::invalid_argument("Rng::gamma: alpha must be positive");
    if (alpha < 1.0) {
      double u = 1.0 - uniform();  // (0, 1]
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  // Symmetric Dirichlet(alpha) over n categories.
  std::vector<double> dirichlet(double alpha, size_t n) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      p[i] = gamma(alpha);
      sum += p[i];
    }
    for (size_t i = 0; i < n; ++i) p[i] /= sum;
    return p;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedsim
