#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace synrisk {

// splitmix64 step; used to derive independent sub-seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic sub-seed for a unit of work. Results must not depend on
// scheduling, so every parallel task seeds its own engine from this.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t s = root;
  std::uint64_t h = splitmix64(s);
  s = h ^ (a + 0x9e3779b97f4a7c15ULL);
  h = splitmix64(s);
  s = h ^ (b + 0xbf58476d1ce4e5b9ULL);
  return splitmix64(s);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Inverse-CDF draw from an unnormalized nonnegative weight vector.
inline std::size_t sample_index(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (x < acc) return i;
  }
  return weights.empty() ? 0 : weights.size() - 1;
}

// One draw from Dirichlet(alpha) via normalized gammas.
inline std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                            Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(alpha[i], 1.0);
    out[i] = g(rng);
    total += out[i];
  }
  if (total <= 0.0) {
    // All-zero gamma draws can only happen for pathologically tiny alphas;
    // fall back to uniform mass.
    for (double& v : out) v = 1.0 / static_cast<double>(out.size());
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace synrisk
