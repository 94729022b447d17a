#include "vqad/diffusion/sampling.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "vqad/diffusion/schedule.hpp"
#include "vqad/error.hpp"

namespace vqad::diffusion {

std::vector<double> tempered_probabilities(std::span<const double> logits, std::size_t codes,
                                           double temperature) {
  if (!(temperature >= 0.0)) throw UsageError("temperature must be non-negative");
  if (codes == 0 || logits.size() % codes != 0) throw UsageError("tempered_probabilities: ragged logits");
  std::vector<double> probs(logits.size(), 0.0);
  for (std::size_t r = 0; r < logits.size() / codes; ++r) {
    const double* in = logits.data() + r * codes;
    double* out = probs.data() + r * codes;
    std::size_t best = 0;
    for (std::size_t c = 0; c < codes; ++c) {
      if (std::isnan(in[c]) || in[c] == std::numeric_limits<double>::infinity()) {
        throw NumericFault("sampling: invalid logit at position " + std::to_string(r));
      }
      if (in[c] > in[best]) best = c;
    }
    if (in[best] == -std::numeric_limits<double>::infinity()) {
      throw NumericFault("sampling: no code has positive probability at position " + std::to_string(r));
    }
    if (temperature == 0.0) {
      out[best] = 1.0;
      continue;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < codes; ++c) {
      out[c] = std::exp((in[c] - in[best]) / temperature);
      total += out[c];
    }
    for (std::size_t c = 0; c < codes; ++c) out[c] /= total;
  }
  return probs;
}

TokenGrid reverse_step_probs(const TokenGrid& zt, std::size_t t, std::size_t delta,
                             std::span<const double> probs, Rng& rng) {
  if (delta < 1 || delta > t) {
    throw UsageError("reverse_step: need 1 <= delta <= t, got delta=" + std::to_string(delta) +
                     " t=" + std::to_string(t));
  }
  const std::size_t K = zt.codes;
  if (probs.size() != zt.size() * K) throw UsageError("reverse_step: probabilities do not match grid");
  const double p_unmask = static_cast<double>(delta) / static_cast<double>(t);
  TokenGrid next = zt;
  for (std::size_t i = 0; i < zt.size(); ++i) {
    if (!zt.is_masked(i)) continue;
    const double u = rng.uniform();
    if (delta != t && u >= p_unmask) continue;
    next.values[i] = static_cast<Token>(rng.categorical(probs.subspan(i * K, K)));
  }
  return next;
}

TokenGrid reverse_step(const TokenGrid& zt, std::size_t t, std::size_t delta,
                       std::span<const double> logits, double temperature, Rng& rng) {
  return reverse_step_probs(zt, t, delta, tempered_probabilities(logits, zt.codes, temperature), rng);
}

TokenGrid reverse_process(TokenGrid z, std::span<const std::size_t> budget, const ProbabilityFn& probs,
                          Rng& rng, SampleStats* stats) {
  if (budget.empty()) throw UsageError("reverse process: empty step budget");
  check_step_budget(budget, budget.front());
  for (std::size_t k = 0; k < budget.size(); ++k) {
    const std::size_t t = budget[k];
    const std::size_t next = k + 1 < budget.size() ? budget[k + 1] : 0;
    const std::vector<double> p = probs(z);
    if (stats) {
      ++stats->denoiser_calls;
      ++stats->steps;
    }
    z = reverse_step_probs(z, t, t - next, p, rng);
  }
  if (!z.fully_unmasked()) throw std::logic_error("reverse process finished with MASK tokens left");
  return z;
}

TokenGrid sample(const Denoiser& denoiser, std::span<const std::size_t> budget, double temperature,
                 Rng& rng, SampleStats* stats) {
  if (budget.empty() || budget.front() != denoiser.length()) {
    throw UsageError("sample: step budget must start at T = " + std::to_string(denoiser.length()));
  }
  TokenGrid start(denoiser.height(), denoiser.width(), denoiser.codes());
  return reverse_process(
      std::move(start), budget,
      [&](const TokenGrid& z) {
        return tempered_probabilities(denoiser.logits(z.values), z.codes, temperature);
      },
      rng, stats);
}

double distinct_rate(std::span<const TokenGrid> grids) {
  if (grids.empty()) return 0.0;
  std::set<std::vector<Token>> seen;
  for (const auto& g : grids) seen.insert(g.values);
  return static_cast<double>(seen.size()) / static_cast<double>(grids.size());
}

}  // namespace vqad::diffusion
