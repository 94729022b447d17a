#include "vqad/diffusion/schedule.hpp"

#include "vqad/error.hpp"

namespace vqad::diffusion {

LossMode parse_loss_mode(const std::string& name) {
  if (name == "elbo") return LossMode::elbo;
  if (name == "reweighted") return LossMode::reweighted;
  throw UsageError("unknown loss mode '" + name + "' (expected elbo or reweighted)");
}

std::string loss_mode_name(LossMode mode) { return mode == LossMode::elbo ? "elbo" : "reweighted"; }

DiffusionSchedule DiffusionSchedule::full(std::size_t length, LossMode mode) {
  return {length, mode, make_step_budget(length, length)};
}

std::vector<std::size_t> make_step_budget(std::size_t total_steps, std::size_t n_steps) {
  if (n_steps < 1 || n_steps > total_steps) {
    throw UsageError("step budget: need 1 <= n_steps <= T, got n_steps=" + std::to_string(n_steps) +
                     " T=" + std::to_string(total_steps));
  }
  std::vector<std::size_t> budget(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) budget[k] = total_steps - (k * total_steps) / n_steps;
  return budget;
}

void check_step_budget(std::span<const std::size_t> budget, std::size_t total_steps) {
  if (budget.empty()) throw UsageError("step budget is empty");
  if (budget.front() != total_steps) {
    throw UsageError("step budget must start at T=" + std::to_string(total_steps) + ", starts at " +
                     std::to_string(budget.front()));
  }
  for (std::size_t k = 1; k < budget.size(); ++k) {
    if (budget[k] >= budget[k - 1]) throw UsageError("step budget is not strictly decreasing");
  }
  if (budget.back() == 0) throw UsageError("step budget may not visit t=0");
}

double loss_weight(LossMode mode, std::size_t t, std::size_t total_steps) {
  if (t < 1 || t > total_steps) {
    throw UsageError("loss weight: t=" + std::to_string(t) + " outside [1, " +
                     std::to_string(total_steps) + "]");
  }
  const double T = static_cast<double>(total_steps);
  return mode == LossMode::elbo ? 1.0 / static_cast<double>(t)
                                : (T - static_cast<double>(t) + 1.0) / T;
}

}  // namespace vqad::diffusion
