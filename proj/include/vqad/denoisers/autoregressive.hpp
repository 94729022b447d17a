#pragma once

#include <span>

#include "vqad/diffusion/denoiser.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/sampling.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::denoisers {

/// Raster-order sampling from a next-token model: exactly L calls, position i
/// drawn from softmax(row i / temperature) given the tokens already placed.
diffusion::TokenGrid ar_sample(const diffusion::Denoiser& causal, double temperature, diffusion::Rng& rng,
                               diffusion::SampleStats* stats = nullptr);

/// -log p(z) in nats under a next-token model (one teacher-forced call).
double ar_nll(const diffusion::TokenGrid& z, const diffusion::Denoiser& causal);

/// Mean NLL in bits per latent dimension over a validation set.
double ar_bits_per_dim(std::span<const diffusion::TokenGrid> grids, const diffusion::Denoiser& causal);

}  // namespace vqad::denoisers
