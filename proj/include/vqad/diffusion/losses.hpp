#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/schedule.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::diffusion {

struct MaskedBatch {
  std::vector<TokenGrid> z0;
  std::vector<TokenGrid> zt;
  std::vector<std::size_t> t;
};

/// One timestep t ~ U{1..T} per element, then z_t ~ q(z_t | z0).
MaskedBatch sample_masked_batch(std::span<const TokenGrid> z0, std::size_t total_steps, Rng& rng);

/// Row targets and weights for masked cross-entropy over [B * L, K] logits:
/// masked rows carry w(t_b) / B, every other row weight 0.
struct LossTargets {
  std::vector<std::int32_t> targets;
  std::vector<float> weights;
  std::size_t masked_positions = 0;
  std::size_t empty_items = 0;  // elements whose z_t had no MASK (contribute 0)
};

LossTargets diffusion_targets(const MaskedBatch& batch, LossMode mode, std::size_t total_steps);

/// -(1/B) sum_b w(t_b) sum_{masked i} log p(z0_i | z_t), from per-element logits.
double diffusion_loss(const MaskedBatch& batch, std::span<const std::vector<double>> logits,
                      LossMode mode, std::size_t total_steps);

/// The alternative simplified-form weight (T - t - 1)/T.
double shifted_weight(std::size_t t, std::size_t total_steps);

/// KL( q(x_{t-1} | x_0) || p(x_{t-1} | x_t) ) summed over positions, using the
/// posterior without access to x_t and the reverse process built from the
/// denoiser's prediction of x_0.
double kl_loss_term(const TokenGrid& z0, const TokenGrid& zt, std::size_t t,
                    std::size_t total_steps, std::span<const double> logits);

/// -sum_{masked i} weight * log p(z0_i | z_t): the simplified form without its constant.
double simplified_loss_term(const TokenGrid& z0, const TokenGrid& zt, std::span<const double> logits,
                            double weight);

}  // namespace vqad::diffusion
