#include "vqad/vq/train_tokenizer.hpp"

#include <cmath>
#include <string>

#include "vqad/autodiff/ops.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/error.hpp"

namespace vqad::vq {

TrainTokenizerResult train_tokenizer(std::span<const Image> dataset, Tokenizer& tokenizer,
                                     const TrainTokenizerConfig& config,
                                     const std::function<void(const TokenizerLogRow&)>& on_row) {
  if (dataset.empty()) throw UsageError("train_tokenizer: empty dataset");
  if (config.batch == 0) throw UsageError("train_tokenizer: batch size must be >= 1");
  const auto params = tokenizer.parameters();
  TrainTokenizerResult result;
  result.adam = ad::AdamState::for_parameters(params, config.adam);
  diffusion::Rng rng(config.seed, 0x7e0);
  Codebook& codebook = tokenizer.codebook();
  codebook.reset_usage();

  for (std::size_t step = 1; step <= config.steps; ++step) {
    try {
      std::vector<Image> batch;
      batch.reserve(config.batch);
      for (std::size_t b = 0; b < config.batch; ++b) batch.push_back(dataset[rng.uniform_int(0, dataset.size() - 1)]);

      ad::Graph g;
      const auto x = g.constant(to_nchw(batch));
      const auto e_nchw = tokenizer.encode(g, x, true);
      const auto e = ad::nchw_to_rows(e_nchw);
      const Quantized q = quantize(e.value(), codebook);
      const auto z_q = ad::embedding(g.parameter(codebook.entries), q.indices);
      const auto& es = e_nchw.shape();
      const auto z_st = ad::rows_to_nchw(ad::straight_through(e, z_q), es[0], es[2], es[3]);
      const auto x_hat = tokenizer.decode(g, z_st, true);
      const VqLoss loss = vq_loss(x, x_hat, e, z_q, tokenizer.config().beta);

      ad::zero_grad(params);
      g.backward(loss.total);
      // only the reconstruction term reaches the decoder, so its final layer
      // gradient is the reconstruction gradient
      const auto& grad = tokenizer.final_decoder_weights().grad;
      double norm = 0.0;
      for (float v : grad.data()) norm += static_cast<double>(v) * v;
      norm = std::sqrt(norm);
      ad::adam_update(params, result.adam);

      if (step % config.log_every == 0 || step == config.steps) {
        TokenizerLogRow row;
        row.step = step;
        row.loss_rec = loss.rec.value().item();
        row.loss_codebook = loss.codebook.value().item();
        row.loss_commit = loss.commit.value().item();
        row.lambda = adaptive_lambda(norm, 0.0, tokenizer.config().delta, tokenizer.config().lambda_max);
        for (auto c : codebook.usage) row.codes_used += c > 0;
        codebook.reset_usage();
        result.log.push_back(row);
        if (on_row) on_row(row);
      }
    } catch (const NumericFault& e) {
      throw NumericFault("train_tokenizer: step " + std::to_string(step) + ": " + e.what());
    }
  }
  return result;
}

double reconstruction_mse(std::span<const Image> dataset, const Tokenizer& tokenizer) {
  if (dataset.empty()) throw UsageError("reconstruction_mse: empty dataset");
  double total = 0.0;
  for (const auto& im : dataset) total += mse(im, tokenizer.decode_tokens(tokenizer.tokenize(im)));
  return total / static_cast<double>(dataset.size());
}

}  // namespace vqad::vq
