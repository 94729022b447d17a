#pragma once

#include <cstddef>
#include <vector>

#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::diffusion {

/// q(z_t | z_0): each position independently becomes MASK with probability t/T.
TokenGrid forward_mask(const TokenGrid& z0, std::size_t t, std::size_t total_steps, Rng& rng);

/// Takes z_s (masked to step s) on to step t >= s by masking each surviving
/// position with probability (t - s)/(T - s).
TokenGrid mask_further(const TokenGrid& zs, std::size_t s, std::size_t t, std::size_t total_steps,
                       Rng& rng);

/// Posterior of x_{t-1} given x_0 without access to x_t beyond its mask
/// pattern, [L * (K + 1)] with column K the MASK state:
///   unmasked in z_t: 1 on the code; masked: 1 - (t-1)/T on the code, (t-1)/T on MASK.
std::vector<double> posterior_q(const TokenGrid& z0, const TokenGrid& zt, std::size_t t,
                                std::size_t total_steps);

/// Throws UsageError unless z_t agrees with z_0 wherever z_t is unmasked.
void check_consistent(const TokenGrid& z0, const TokenGrid& zt);

}  // namespace vqad::diffusion
