#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace deconv {

// splitmix64; used to derive independent sub-stream seeds from one master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed-splitting scheme: every task seeds its own mt19937_64 with
// derive_seed(master, {path...}), where the path encodes the task identity
// (e.g. {n_index, replicate, stream}).  Same master + path -> same stream,
// regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master ^ 0xd1b54a32d192ed03ULL;
  for (std::uint64_t p : path) {
    s ^= splitmix64(s) + p;
    splitmix64(s);
  }
  return splitmix64(s);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double draw_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double draw_normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

inline double draw_cauchy(Rng& rng, double median = 0.0, double scale = 1.0) {
  return std::cauchy_distribution<double>(median, scale)(rng);
}

inline double draw_gamma(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

inline double draw_beta(Rng& rng, double a, double b) {
  double x = draw_gamma(rng, a, 1.0);
  double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

// Inv-Ga(a,b) with density b^a/Gamma(a) z^{-a-1} exp(-b/z).
inline double draw_inv_gamma(Rng& rng, double a, double b) {
  return b / draw_gamma(rng, a, 1.0);
}

inline double draw_exponential(Rng& rng, double rate) {
  return std::exponential_distribution<double>(rate)(rng);
}

// Index draw proportional to weights (need not be normalized).
inline int draw_categorical(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = draw_uniform(rng) * total;
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    c += w[k];
    if (u <= c) return static_cast<int>(k);
  }
  return static_cast<int>(w.size()) - 1;
}

} // namespace deconv
