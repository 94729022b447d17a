#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace vqad::diffusion {

/// Seeded random stream. Every sampling chain owns one; derived streams for
/// parallel chains come from fork(), so results never depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double uniform() { return unit_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [lo, hi].
  std::size_t uniform_int(std::size_t lo, std::size_t hi);
  double normal() { return normal_(engine_); }
  /// Index drawn proportionally to non-negative weights (need not sum to 1).
  std::size_t categorical(std::span<const double> weights);

  Rng fork(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x100000001b3ULL + stream + 1); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vqad::diffusion
