#include "vqad/denoisers/autoregressive.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "vqad/error.hpp"

namespace vqad::denoisers {

using diffusion::Token;
using diffusion::TokenGrid;

TokenGrid ar_sample(const diffusion::Denoiser& causal, double temperature, diffusion::Rng& rng,
                    diffusion::SampleStats* stats) {
  const std::size_t K = causal.codes();
  TokenGrid z(causal.height(), causal.width(), K);  // later positions stay MASK placeholders
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::vector<double> logits = causal.logits(z.values);
    if (stats) {
      ++stats->denoiser_calls;
      ++stats->steps;
    }
    const std::vector<double> probs = diffusion::tempered_probabilities(
        std::span<const double>(logits).subspan(i * K, K), K, temperature);
    z.values[i] = static_cast<Token>(rng.categorical(probs));
  }
  return z;
}

namespace {
double nll_from_logits(const TokenGrid& z, std::span<const double> logits) {
  const std::vector<double> logp = diffusion::log_softmax_rows(logits, z.codes);
  double nll = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) nll -= logp[i * z.codes + z.values[i]];
  return nll;
}
}  // namespace

double ar_nll(const TokenGrid& z, const diffusion::Denoiser& causal) {
  if (z.size() != causal.length() || !z.fully_unmasked()) throw UsageError("ar_nll: grid does not fit model");
  return nll_from_logits(z, causal.logits(z.values));
}

double ar_bits_per_dim(std::span<const TokenGrid> grids, const diffusion::Denoiser& causal) {
  if (grids.empty()) throw UsageError("ar_bits_per_dim: empty validation set");
  std::vector<std::vector<Token>> queries;
  for (const auto& g : grids) {
    if (g.size() != causal.length() || !g.fully_unmasked()) throw UsageError("ar_bits_per_dim: grid does not fit model");
    queries.push_back(g.values);
  }
  const auto logits = causal.logits_batch(queries);
  double total = 0.0;
  for (std::size_t n = 0; n < grids.size(); ++n) total += nll_from_logits(grids[n], logits[n]);
  return total / (static_cast<double>(grids.size()) * static_cast<double>(causal.length()) * std::numbers::ln2);
}

}  // namespace vqad::denoisers
