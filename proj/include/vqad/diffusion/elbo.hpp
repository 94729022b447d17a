#pragma once

#include <cstddef>
#include <span>

#include "vqad/diffusion/denoiser.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::diffusion {

/// Bound on log p(z0) in nats (<= 0) with T = L; bits_per_dim is the
/// corresponding NLL bound -nats / (L ln 2).
struct ElboEstimate {
  double nats = 0.0;
  double std_error = 0.0;  // zero in exact mode
  double bits_per_dim = 0.0;
  std::size_t samples = 0;
};

/// Largest grid the exact mode enumerates (2^L mask patterns).
inline constexpr std::size_t kMaxExactLength = 8;

/// Total probability weight of one mask pattern with c masked of L positions:
/// sum over t of (1/t) (t/T)^c (1 - t/T)^(L - c).
double mask_pattern_weight(std::size_t masked, std::size_t length, std::size_t total_steps);

/// sum_t (1/t) E_{q(z_t|z0)} [ sum_{masked i} log p(z0_i | z_t) ], summed
/// exhaustively over every mask pattern. Throws NumericFault if a pattern
/// with positive weight assigns zero probability to the data.
ElboEstimate elbo_exact(const TokenGrid& z0, const Denoiser& denoiser);

/// Unbiased estimate of the same bound: t ~ U{1..T}, z_t ~ q(z_t|z0), term
/// (T/t) sum_{masked i} log p(z0_i | z_t), averaged over n draws.
ElboEstimate elbo_monte_carlo(const TokenGrid& z0, const Denoiser& denoiser, std::size_t n,
                              Rng& rng);

/// Mean bound over a dataset; exact mode when `exact`, else n draws per grid
/// (batched through Denoiser::logits_batch).
ElboEstimate dataset_elbo(std::span<const TokenGrid> grids, const Denoiser& denoiser, bool exact,
                          std::size_t n, Rng& rng);

/// NLL upper bound in bits per latent dimension over a validation set.
double nll_bits_per_dim(std::span<const TokenGrid> grids, const Denoiser& denoiser, bool exact,
                        std::size_t n, Rng& rng);

}  // namespace vqad::diffusion
