#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vqad/autodiff/adam.hpp"
#include "vqad/vq/image.hpp"
#include "vqad/vq/tokenizer.hpp"

namespace vqad::vq {

struct TrainTokenizerConfig {
  std::size_t steps = 20000;
  std::size_t batch = 16;
  ad::AdamConfig adam{.learning_rate = 1e-3f};
  std::size_t log_every = 100;
  std::uint64_t seed = 0;
};

/// codes_used counts distinct codes hit since the previous row.
struct TokenizerLogRow {
  std::size_t step = 0;
  double loss_rec = 0.0;
  double loss_codebook = 0.0;
  double loss_commit = 0.0;
  double lambda = 0.0;
  std::size_t codes_used = 0;
};

struct TrainTokenizerResult {
  std::vector<TokenizerLogRow> log;
  ad::AdamState adam;
};

/// Adam on the VQ loss over batches drawn with replacement. The adaptive
/// weight is computed from the reconstruction gradient at the final decoder
/// layer and logged only, since no adversarial term is trained.
TrainTokenizerResult train_tokenizer(std::span<const Image> dataset, Tokenizer& tokenizer,
                                     const TrainTokenizerConfig& config,
                                     const std::function<void(const TokenizerLogRow&)>& on_row = {});

/// Mean reconstruction MSE of decode(quantize(encode(x))) over a dataset.
double reconstruction_mse(std::span<const Image> dataset, const Tokenizer& tokenizer);

}  // namespace vqad::vq
