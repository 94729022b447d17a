#include "vqad/diffusion/rng.hpp"

#include <cmath>

#include "vqad/error.hpp"

namespace vqad::diffusion {

namespace {
std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(seeded(seed, stream)) {}

std::size_t Rng::uniform_int(std::size_t lo, std::size_t hi) {
  if (lo > hi) throw UsageError("uniform_int: empty range");
  return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw NumericFault("categorical: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw NumericFault("categorical: all weights are zero");
  const double target = uniform() * total;
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    running += weights[i];
    last_positive = i;
    if (target < running) return i;
  }
  return last_positive;  // rounding pushed target past the final partial sum
}

}  // namespace vqad::diffusion
