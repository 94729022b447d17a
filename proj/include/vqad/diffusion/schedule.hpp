#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vqad::diffusion {

enum class LossMode { elbo, reweighted };

LossMode parse_loss_mode(const std::string& name);
std::string loss_mode_name(LossMode mode);

struct DiffusionSchedule {
  std::size_t total_steps = 0;  // T
  LossMode loss_mode = LossMode::reweighted;
  std::vector<std::size_t> step_budget;

  /// T = length and the full budget [T, T-1, ..., 1].
  static DiffusionSchedule full(std::size_t length, LossMode mode = LossMode::reweighted);
};

/// n timesteps t_k = T - floor(k T / n), k = 0..n-1: starts at T, gaps differ
/// by at most one, and the last step's jump to zero equals its own t.
std::vector<std::size_t> make_step_budget(std::size_t total_steps, std::size_t n_steps);

/// Throws UsageError unless the budget is strictly decreasing from `total_steps`
/// and ends at a positive timestep.
void check_step_budget(std::span<const std::size_t> budget, std::size_t total_steps);

/// Per-timestep loss weight: 1/t for the ELBO, (T - t + 1)/T when reweighted.
double loss_weight(LossMode mode, std::size_t t, std::size_t total_steps);

}  // namespace vqad::diffusion
