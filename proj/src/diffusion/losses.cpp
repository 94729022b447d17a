#include "vqad/diffusion/losses.hpp"

#include <cmath>

#include "vqad/diffusion/denoiser.hpp"
#include "vqad/diffusion/masking.hpp"
#include "vqad/error.hpp"

namespace vqad::diffusion {

MaskedBatch sample_masked_batch(std::span<const TokenGrid> z0, std::size_t total_steps, Rng& rng) {
  if (z0.empty()) throw UsageError("masked batch: empty batch");
  MaskedBatch batch;
  for (const auto& g : z0) {
    const std::size_t t = rng.uniform_int(1, total_steps);
    batch.z0.push_back(g);
    batch.zt.push_back(forward_mask(g, t, total_steps, rng));
    batch.t.push_back(t);
  }
  return batch;
}

LossTargets diffusion_targets(const MaskedBatch& batch, LossMode mode, std::size_t total_steps) {
  LossTargets out;
  const double inv_batch = 1.0 / static_cast<double>(batch.z0.size());
  for (std::size_t b = 0; b < batch.z0.size(); ++b) {
    const TokenGrid& z0 = batch.z0[b];
    const TokenGrid& zt = batch.zt[b];
    const float w = static_cast<float>(loss_weight(mode, batch.t[b], total_steps) * inv_batch);
    std::size_t masked = 0;
    for (std::size_t i = 0; i < z0.size(); ++i) {
      out.targets.push_back(z0.values[i]);
      const bool m = zt.is_masked(i);
      out.weights.push_back(m ? w : 0.0f);
      masked += m;
    }
    out.masked_positions += masked;
    if (masked == 0) ++out.empty_items;
  }
  return out;
}

double diffusion_loss(const MaskedBatch& batch, std::span<const std::vector<double>> logits,
                      LossMode mode, std::size_t total_steps) {
  if (logits.size() != batch.z0.size()) throw UsageError("diffusion loss: one logits row set per element");
  double total = 0.0;
  for (std::size_t b = 0; b < batch.z0.size(); ++b) {
    total += simplified_loss_term(batch.z0[b], batch.zt[b], logits[b],
                                  loss_weight(mode, batch.t[b], total_steps));
  }
  return total / static_cast<double>(batch.z0.size());
}

double shifted_weight(std::size_t t, std::size_t total_steps) {
  if (t < 1 || t > total_steps) throw UsageError("shifted weight: t outside [1, T]");
  return (static_cast<double>(total_steps) - static_cast<double>(t) - 1.0) /
         static_cast<double>(total_steps);
}

double kl_loss_term(const TokenGrid& z0, const TokenGrid& zt, std::size_t t,
                    std::size_t total_steps, std::span<const double> logits) {
  const std::vector<double> q = posterior_q(z0, zt, t, total_steps);
  const std::vector<double> logp = log_softmax_rows(logits, z0.codes);
  const std::size_t width = z0.codes + 1;
  const double inv_t = 1.0 / static_cast<double>(t);
  double kl = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (!zt.is_masked(i)) continue;  // q and p both put all mass on z0_i
    const double q_code = q[i * width + z0.values[i]];
    const double q_mask = q[i * width + z0.codes];
    // reverse process: code with (1/t) p(z0_i | z_t), MASK with 1 - 1/t
    kl += q_code * (std::log(q_code) - (std::log(inv_t) + logp[i * z0.codes + z0.values[i]]));
    if (q_mask > 0.0) kl += q_mask * (std::log(q_mask) - std::log1p(-inv_t));
  }
  return kl;
}

double simplified_loss_term(const TokenGrid& z0, const TokenGrid& zt, std::span<const double> logits,
                            double weight) {
  const std::vector<double> logp = log_softmax_rows(logits, z0.codes);
  double total = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (zt.is_masked(i)) total -= weight * logp[i * z0.codes + z0.values[i]];
  }
  return total;
}

}  // namespace vqad::diffusion
