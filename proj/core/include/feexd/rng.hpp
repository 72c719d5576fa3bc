#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace feexd {

/// splitmix64 step; the standard finalizer used to stretch one seed into a
/// family of decorrelated sub-seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Well-known stream tags so independent random decisions never share a
/// generator. Tag values are part of the reproducibility contract.
enum class RngStream : uint64_t {
  partition = 1,
  init = 2,
  client_sample = 3,
  shuffle = 4,
  synth_data = 5,
  test_gen = 6,
};

/// Deterministically mixes (master seed, stream, round, client) into one
/// sub-seed. Chained splitmix64 so every field perturbs the whole word.
inline uint64_t derive_seed(uint64_t master, RngStream stream,
                            uint64_t round = 0, uint64_t client = 0) {
  uint64_t s = splitmix64(master);
  s = splitmix64(s ^ static_cast<uint64_t>(stream));
  s = splitmix64(s ^ round);
  s = splitmix64(s ^ client);
  return s;
}

/// Engine for a derived sub-seed. mt19937_64 keeps draw sequences identical
/// across platforms for a fixed seed.
inline std::mt19937_64 make_engine(uint64_t master, RngStream stream,
                                   uint64_t round = 0, uint64_t client = 0) {
  return std::mt19937_64(derive_seed(master, stream, round, client));
}

// The std <random> distributions are implementation-defined, so every
// double-valued draw below is built directly on raw engine words. This keeps
// runs bit-identical across standard libraries.

/// Uniform double in [0, 1) with 53 random bits.
inline double next_double01(std::mt19937_64 &eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform int in [0, n). Rejection sampling, so no modulo bias.
inline uint64_t next_index(std::mt19937_64 &eng, uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_index: n must be positive");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

/// Standard normal via Box-Muller. Two uniforms per draw; no cached state.
inline double next_gaussian(std::mt19937_64 &eng) {
  const double u1 = 1.0 - next_double01(eng);  // (0, 1]
  const double u2 = next_double01(eng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

/// Gamma(alpha, 1) via Marsaglia-Tsang, with the alpha<1 boost.
inline double next_gamma(std::mt19937_64 &eng, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("next_gamma: alpha must be > 0");
  if (alpha < 1.0) {
    const double u = 1.0 - next_double01(eng);
    return next_gamma(eng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = next_gaussian(eng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - next_double01(eng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

/// Proportions from Dirichlet(alpha * 1_n).
inline std::vector<double> next_dirichlet(std::mt19937_64 &eng, int n,
                                          double alpha) {
  if (n < 1) throw std::invalid_argument("next_dirichlet: n must be >= 1");
  std::vector<double> g(n);
  for (;;) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      g[i] = next_gamma(eng, alpha);
      sum += g[i];
    }
    if (sum > 0.0) {
      for (double &v : g) v /= sum;
      return g;
    }
  }
}

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle_in_place(std::mt19937_64 &eng, std::vector<T> &v) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = next_index(eng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace feexd
