#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "vqad/diffusion/denoiser.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::diffusion {

/// softmax(logits / temperature) per K-wide row; temperature 0 puts all mass
/// on the first maximal entry.
std::vector<double> tempered_probabilities(std::span<const double> logits, std::size_t codes,
                                           double temperature);

/// Reverse step on precomputed per-position probabilities [L * K]: every
/// MASK position independently unmasks with probability delta/t and draws its
/// code from its row. Unmasked positions are copied unchanged.
TokenGrid reverse_step_probs(const TokenGrid& zt, std::size_t t, std::size_t delta,
                             std::span<const double> probs, Rng& rng);

/// reverse_step_probs with rows softmax(logits / temperature).
TokenGrid reverse_step(const TokenGrid& zt, std::size_t t, std::size_t delta,
                       std::span<const double> logits, double temperature, Rng& rng);

struct SampleStats {
  std::size_t denoiser_calls = 0;
  std::size_t steps = 0;
};

/// Per-position probabilities for the current grid.
using ProbabilityFn = std::function<std::vector<double>(const TokenGrid&)>;

/// Runs the reverse process from `start` over the visited timesteps in
/// `budget` (strictly decreasing, ending > 0); the final step unmasks
/// everything. `stats` counts one call of `probs` per step.
TokenGrid reverse_process(TokenGrid start, std::span<const std::size_t> budget,
                          const ProbabilityFn& probs, Rng& rng, SampleStats* stats = nullptr);

/// Unconditional sample: all-MASK start of the denoiser's extents, T = L.
TokenGrid sample(const Denoiser& denoiser, std::span<const std::size_t> budget, double temperature,
                 Rng& rng, SampleStats* stats = nullptr);

/// Fraction of distinct grids in a collection.
double distinct_rate(std::span<const TokenGrid> grids);

}  // namespace vqad::diffusion
