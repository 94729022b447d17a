#include "vqad/diffusion/elbo.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "vqad/diffusion/masking.hpp"
#include "vqad/error.hpp"

namespace vqad::diffusion {

namespace {

void check_denoiser(const TokenGrid& z0, const Denoiser& denoiser) {
  if (z0.size() != denoiser.length() || z0.codes != denoiser.codes()) {
    throw UsageError("elbo: grid of " + std::to_string(z0.size()) + " tokens over " +
                     std::to_string(z0.codes) + " codes does not fit denoiser (L=" +
                     std::to_string(denoiser.length()) + ", K=" + std::to_string(denoiser.codes()) + ")");
  }
  if (!z0.fully_unmasked()) throw UsageError("elbo: data grid contains MASK");
}

// sum over masked positions of log p(z0_i | z_t)
double masked_log_likelihood(const TokenGrid& z0, const TokenGrid& zt, std::span<const double> logits) {
  const std::vector<double> logp = log_softmax_rows(logits, z0.codes);
  double total = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (zt.is_masked(i)) total += logp[i * z0.codes + z0.values[i]];
  }
  return total;
}

ElboEstimate finish(double sum, double sum_sq, std::size_t n, std::size_t length) {
  ElboEstimate e;
  e.samples = n;
  e.nats = sum / static_cast<double>(n);
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / static_cast<double>(n - 1));
    e.std_error = std::sqrt(var / static_cast<double>(n));
  }
  e.bits_per_dim = -e.nats / (static_cast<double>(length) * std::numbers::ln2);
  return e;
}

}  // namespace

double mask_pattern_weight(std::size_t masked, std::size_t length, std::size_t total_steps) {
  double w = 0.0;
  for (std::size_t t = 1; t <= total_steps; ++t) {
    const double p = static_cast<double>(t) / static_cast<double>(total_steps);
    w += std::pow(p, static_cast<double>(masked)) * std::pow(1.0 - p, static_cast<double>(length - masked)) /
         static_cast<double>(t);
  }
  return w;
}

ElboEstimate elbo_exact(const TokenGrid& z0, const Denoiser& denoiser) {
  check_denoiser(z0, denoiser);
  const std::size_t L = z0.size();
  if (L > kMaxExactLength) {
    throw UsageError("elbo: exact mode enumerates at most " + std::to_string(kMaxExactLength) +
                     " positions, grid has " + std::to_string(L));
  }
  std::vector<std::vector<Token>> queries;
  std::vector<TokenGrid> patterns;
  for (std::uint32_t bits = 1; bits < (1u << L); ++bits) {
    TokenGrid zt = z0;
    for (std::size_t i = 0; i < L; ++i) {
      if (bits >> i & 1u) zt.values[i] = zt.mask();
    }
    queries.push_back(zt.values);
    patterns.push_back(std::move(zt));
  }
  const auto logits = denoiser.logits_batch(queries);
  double total = 0.0;
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const double w = mask_pattern_weight(patterns[p].count_masked(), L, L);
    const double ll = masked_log_likelihood(z0, patterns[p], logits[p]);
    if (!std::isfinite(ll)) {
      if (w > 0.0) {
        throw NumericFault("elbo: denoiser assigns zero probability to the data under mask pattern " +
                           std::to_string(p + 1));
      }
      continue;
    }
    total += w * ll;
  }
  ElboEstimate e = finish(total, total * total, 1, L);
  e.samples = patterns.size();
  return e;
}

ElboEstimate elbo_monte_carlo(const TokenGrid& z0, const Denoiser& denoiser, std::size_t n, Rng& rng) {
  return dataset_elbo(std::span<const TokenGrid>(&z0, 1), denoiser, false, n, rng);
}

ElboEstimate dataset_elbo(std::span<const TokenGrid> grids, const Denoiser& denoiser, bool exact,
                          std::size_t n, Rng& rng) {
  if (grids.empty()) throw UsageError("elbo: empty dataset");
  const std::size_t L = denoiser.length();
  if (exact) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t patterns = 0;
    for (const auto& g : grids) {
      const ElboEstimate e = elbo_exact(g, denoiser);
      sum += e.nats;
      sum_sq += e.nats * e.nats;
      patterns += e.samples;
    }
    ElboEstimate out = finish(sum, sum_sq, grids.size(), L);
    out.std_error = 0.0;
    out.samples = patterns;
    return out;
  }
  if (n == 0) throw UsageError("elbo: need at least one Monte Carlo draw");
  std::vector<std::vector<Token>> queries;
  std::vector<std::size_t> owner, steps;
  std::vector<TokenGrid> masked;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    check_denoiser(grids[g], denoiser);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t t = rng.uniform_int(1, L);
      masked.push_back(forward_mask(grids[g], t, L, rng));
      queries.push_back(masked.back().values);
      owner.push_back(g);
      steps.push_back(t);
    }
  }
  const auto logits = denoiser.logits_batch(queries);
  // per-grid means first, so the standard error reflects grids and draws
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t q = 0; q < masked.size(); ++q) {
    const TokenGrid& z0 = grids[owner[q]];
    double term = 0.0;
    if (masked[q].count_masked() > 0) {
      term = static_cast<double>(L) / static_cast<double>(steps[q]) *
             masked_log_likelihood(z0, masked[q], logits[q]);
    }
    if (!std::isfinite(term)) throw NumericFault("elbo: zero-probability data token in Monte Carlo draw");
    sum += term;
    sum_sq += term * term;
  }
  return finish(sum, sum_sq, masked.size(), L);
}

double nll_bits_per_dim(std::span<const TokenGrid> grids, const Denoiser& denoiser, bool exact,
                        std::size_t n, Rng& rng) {
  if (grids.empty()) throw UsageError("nll_bits_per_dim: empty validation set");
  return dataset_elbo(grids, denoiser, exact, n, rng).bits_per_dim;
}

}  // namespace vqad::diffusion
