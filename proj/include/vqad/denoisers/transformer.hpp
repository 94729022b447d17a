#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vqad/autodiff/graph.hpp"
#include "vqad/denoisers/trainable.hpp"

namespace vqad::denoisers {

struct TransformerConfig {
  std::size_t codes = 32;  // K; the input vocabulary adds MASK (row K) and START (row K + 1)
  std::size_t height = 6;
  std::size_t width = 6;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t ff = 256;
  bool causal = false;
  bool position_embeddings = true;
  bool zero_init_head = false;

  std::size_t length() const { return height * width; }
  std::size_t model_width() const { return heads * head_dim; }
  void validate() const;
};

/// Pre-layer-norm transformer encoder over a flattened token grid with learned
/// absolute position embeddings and a GELU feed-forward. Bidirectional by
/// default; the causal variant shifts its input right by a START token so row i
/// sees tokens 0..i-1 only.
template <typename T>
class BasicTransformer final : public BasicTrainableDenoiser<T> {
 public:
  BasicTransformer(TransformerConfig config, std::uint64_t seed);

  const TransformerConfig& config() const noexcept { return config_; }

  std::size_t codes() const override { return config_.codes; }
  std::size_t height() const override { return config_.height; }
  std::size_t width() const override { return config_.width; }
  bool causal() const override { return config_.causal; }

  std::vector<ad::BasicParameter<T>*> parameters() override;
  std::vector<const ad::BasicParameter<T>*> parameters() const;

  ad::BasicVar<T> forward(ad::BasicGraph<T>& graph, std::span<const Token> tokens,
                          std::size_t batch) override;
  /// Same computation with parameters entering as constants.
  ad::BasicVar<T> evaluate(ad::BasicGraph<T>& graph, std::span<const Token> tokens,
                           std::size_t batch) const;

  std::vector<double> logits(std::span<const Token> tokens) const override;
  std::vector<std::vector<double>> logits_batch(
      std::span<const std::vector<Token>> grids) const override;

  /// Named parameter lookup (throws UsageError when absent).
  ad::BasicParameter<T>& parameter(const std::string& name);

 private:
  struct Layer {
    ad::BasicParameter<T> ln1_gain, ln1_bias, wq, wk, wv, wo, bo;
    ad::BasicParameter<T> ln2_gain, ln2_bias, ff1_w, ff1_b, ff2_w, ff2_b;
  };

  template <typename Bind>
  ad::BasicVar<T> run(ad::BasicGraph<T>& graph, std::span<const Token> tokens, std::size_t batch,
                      Bind bind) const;

  TransformerConfig config_;
  ad::BasicParameter<T> token_embedding_;
  ad::BasicParameter<T> position_embedding_;
  std::vector<Layer> layers_;
  ad::BasicParameter<T> final_gain_, final_bias_, head_w_, head_b_;
};

using Transformer = BasicTransformer<float>;

}  // namespace vqad::denoisers
