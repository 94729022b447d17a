#include "vqad/autodiff/adam.hpp"

#include <cmath>

#include "vqad/error.hpp"

namespace vqad::ad {

AdamState AdamState::for_parameters(std::span<Parameter* const> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.shape());
    state.second_moment.emplace_back(p->value.shape());
  }
  return state;
}

void adam_update(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw UsageError("adam_update: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " tensors, got " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.shape() != p.value.shape() || state.first_moment[i].shape() != p.value.shape() ||
        state.second_moment[i].shape() != p.value.shape()) {
      throw UsageError("adam_update: shape mismatch for parameter '" + p.name + "'");
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(static_cast<double>(c.beta1), t);
  const double correction2 = 1.0 - std::pow(static_cast<double>(c.beta2), t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    float* value = p.value.raw();
    const float* grad = p.grad.raw();
    float* m = state.first_moment[i].raw();
    float* v = state.second_moment[i].raw();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0f - c.beta1) * grad[j];
      v[j] = c.beta2 * v[j] + (1.0f - c.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= static_cast<float>(c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
    if (!p.value.all_finite()) {
      throw NumericFault("adam_update: parameter '" + p.name + "' became non-finite");
    }
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace vqad::ad
