#include "vqad/denoisers/train_prior.hpp"

#include <cmath>
#include <limits>

#include "vqad/autodiff/ops.hpp"
#include "vqad/denoisers/autoregressive.hpp"
#include "vqad/diffusion/elbo.hpp"
#include "vqad/diffusion/losses.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/error.hpp"

namespace vqad::denoisers {

using diffusion::TokenGrid;

PriorObjective parse_objective(const std::string& name) {
  if (name == "absorbing") return PriorObjective::absorbing;
  if (name == "autoregressive") return PriorObjective::autoregressive;
  throw UsageError("unknown prior mode '" + name + "' (expected absorbing or autoregressive)");
}

std::string objective_name(PriorObjective objective) {
  return objective == PriorObjective::absorbing ? "absorbing" : "autoregressive";
}

double validation_bpd(std::span<const TokenGrid> val, const TrainableDenoiser& model,
                      const TrainPriorConfig& config) {
  if (config.objective == PriorObjective::autoregressive) return ar_bits_per_dim(val, model);
  diffusion::Rng rng(config.seed, 0x7a11ULL);
  return diffusion::nll_bits_per_dim(val, model, config.val_exact, config.val_draws, rng);
}

TrainPriorResult train_prior(std::span<const TokenGrid> train, std::span<const TokenGrid> val,
                             TrainableDenoiser& model, const TrainPriorConfig& config,
                             const std::function<void(const PriorLogRow&)>& on_row) {
  if (train.empty()) throw UsageError("train_prior: empty token dataset");
  if (config.batch == 0) throw UsageError("train_prior: batch size must be at least 1");
  if (model.causal() != (config.objective == PriorObjective::autoregressive)) {
    throw UsageError("train_prior: objective " + objective_name(config.objective) +
                     " does not match the model's attention mask");
  }
  for (const auto& g : train) {
    if (g.size() != model.length() || g.codes != model.codes() || !g.fully_unmasked()) {
      throw UsageError("train_prior: token grid does not fit the model");
    }
  }
  const std::size_t L = model.length();
  std::vector<ad::Parameter*> params = model.parameters();
  TrainPriorResult result;
  result.adam = ad::AdamState::for_parameters(params, config.adam);
  diffusion::Rng rng(config.seed, 1);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    PriorLogRow row;
    row.step = step;
    row.val_bpd = std::numeric_limits<double>::quiet_NaN();
    try {
      std::vector<TokenGrid> batch;
      for (std::size_t b = 0; b < config.batch; ++b) batch.push_back(train[rng.uniform_int(0, train.size() - 1)]);

      std::vector<diffusion::Token> inputs;
      std::vector<std::int32_t> targets;
      std::vector<float> weights;
      if (config.objective == PriorObjective::absorbing) {
        const auto masked = diffusion::sample_masked_batch(batch, L, rng);
        auto t = diffusion::diffusion_targets(masked, config.loss_mode, L);
        result.empty_items += t.empty_items;
        for (const auto& z : masked.zt) inputs.insert(inputs.end(), z.values.begin(), z.values.end());
        targets = std::move(t.targets);
        weights = std::move(t.weights);
      } else {
        const float w = 1.0f / static_cast<float>(config.batch);
        for (const auto& z : batch) {
          inputs.insert(inputs.end(), z.values.begin(), z.values.end());
          targets.insert(targets.end(), z.values.begin(), z.values.end());
        }
        weights.assign(targets.size(), w);
      }

      ad::zero_grad(params);
      ad::Graph graph;
      ad::Var loss = ad::masked_cross_entropy(model.forward(graph, inputs, config.batch), targets, weights);
      row.loss = loss.value().item();
      graph.backward(loss);
      ad::adam_update(params, result.adam);

      const bool validate = !val.empty() &&
                            ((config.val_every > 0 && step % config.val_every == 0) || step == config.steps);
      if (validate) row.val_bpd = validation_bpd(val, model, config);
    } catch (const NumericFault& e) {
      throw NumericFault("train_prior: step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isnan(row.val_bpd)) result.final_val_bpd = row.val_bpd;
    result.log.push_back(row);
    if (on_row) on_row(row);
  }
  return result;
}

}  // namespace vqad::denoisers
