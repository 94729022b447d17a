#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vqad/autodiff/adam.hpp"
#include "vqad/denoisers/trainable.hpp"
#include "vqad/diffusion/schedule.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::denoisers {

enum class PriorObjective { absorbing, autoregressive };

PriorObjective parse_objective(const std::string& name);
std::string objective_name(PriorObjective objective);

struct TrainPriorConfig {
  std::size_t steps = 3000;
  std::size_t batch = 16;
  ad::AdamConfig adam{.learning_rate = 5e-4f};
  diffusion::LossMode loss_mode = diffusion::LossMode::reweighted;
  PriorObjective objective = PriorObjective::absorbing;
  std::size_t val_every = 500;  // 0: validate only after the last step
  std::size_t val_draws = 4;    // Monte Carlo draws per validation grid
  bool val_exact = false;
  std::uint64_t seed = 0;
};

struct PriorLogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double val_bpd = 0.0;  // NaN on rows without validation
};

struct TrainPriorResult {
  std::vector<PriorLogRow> log;
  ad::AdamState adam;
  double final_val_bpd = 0.0;
  std::size_t empty_items = 0;  // batch elements with nothing masked
};

/// Validation metric used by train_prior: the ELBO bound in bits per
/// dimension for absorbing models, the exact NLL for causal ones. The Monte
/// Carlo stream is reseeded from `seed` on every call.
double validation_bpd(std::span<const diffusion::TokenGrid> val, const TrainableDenoiser& model,
                      const TrainPriorConfig& config);

/// Adam on the absorbing-diffusion loss (weights by config.loss_mode) or on
/// next-token cross-entropy. A NumericFault is rethrown naming the step.
TrainPriorResult train_prior(std::span<const diffusion::TokenGrid> train,
                             std::span<const diffusion::TokenGrid> val, TrainableDenoiser& model,
                             const TrainPriorConfig& config,
                             const std::function<void(const PriorLogRow&)>& on_row = {});

}  // namespace vqad::denoisers
