#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vqad/autodiff/graph.hpp"
#include "vqad/autodiff/tensor.hpp"

namespace vqad::ad {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  /// Zeroed accumulators shaped like each parameter.
  static AdamState for_parameters(std::span<Parameter* const> params, AdamConfig config = {});
};

/// One bias-corrected Adam step over params using their accumulated grads.
void adam_update(std::span<Parameter* const> params, AdamState& state);

void zero_grad(std::span<Parameter* const> params);

}  // namespace vqad::ad
