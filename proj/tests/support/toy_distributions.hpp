#pragma once

#include <cstddef>
#include <vector>

#include "vqad/denoisers/tabular.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::testing {

using denoisers::EnumerableDistribution;
using diffusion::Token;
using diffusion::TokenGrid;

/// Independent positions with the given per-position marginals (L rows of K).
EnumerableDistribution product_distribution(std::size_t height, std::size_t width,
                                            const std::vector<std::vector<double>>& marginals);

/// Raster-order Markov chain: uniform first token, then the previous token
/// repeats with probability `stay`, else one of the other K-1 codes uniformly.
EnumerableDistribution markov_chain(std::size_t height, std::size_t width, std::size_t codes, double stay);

/// Every grid of L = h*w tokens over K codes, equally likely.
EnumerableDistribution uniform_distribution(std::size_t height, std::size_t width, std::size_t codes);

/// Entropy of the joint distribution per position, in bits.
double entropy_rate_bits(const EnumerableDistribution& dist);

TokenGrid draw(const EnumerableDistribution& dist, diffusion::Rng& rng);
std::vector<TokenGrid> draw_many(const EnumerableDistribution& dist, std::size_t n, diffusion::Rng& rng);

/// Probability vector over all K^L grids indexed by diffusion::grid_index.
std::vector<double> dense_law(const EnumerableDistribution& dist);

}  // namespace vqad::testing
