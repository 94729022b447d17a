#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqad/autodiff/graph.hpp"
#include "vqad/diffusion/denoiser.hpp"

namespace vqad::denoisers {

using diffusion::Token;

/// A denoiser whose logits are a differentiable function of its parameters.
template <typename T>
class BasicTrainableDenoiser : public diffusion::Denoiser {
 public:
  virtual std::vector<ad::BasicParameter<T>*> parameters() = 0;
  /// Logits [batch * L, K] for row-stacked token sequences, with parameters
  /// entering the graph as trainable leaves.
  virtual ad::BasicVar<T> forward(ad::BasicGraph<T>& graph, std::span<const Token> tokens,
                                  std::size_t batch) = 0;
  /// Next-token model: row i predicts token i from tokens 0..i-1.
  virtual bool causal() const = 0;
};

using TrainableDenoiser = BasicTrainableDenoiser<float>;

}  // namespace vqad::denoisers
