#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vqad/autodiff/graph.hpp"
#include "vqad/diffusion/token_grid.hpp"
#include "vqad/vq/codebook.hpp"
#include "vqad/vq/image.hpp"

namespace vqad::vq {

struct TokenizerConfig {
  std::size_t channels = 3;
  std::size_t codes = 32;      // K
  std::size_t code_dim = 16;   // D_code
  std::size_t hidden1 = 32;
  std::size_t hidden2 = 64;
  float beta = 0.25f;
  double lambda_max = 1.0;
  double delta = 1e-6;
  bool zero_init_final = false;  // zero the encoder's last layer

  static constexpr std::size_t factor = 4;
  void validate() const;
};

/// Encoder: two stride-2 4x4 convolutions then a 3x3 convolution to D_code
/// channels. Decoder: a 3x3 convolution then two stride-2 transposed
/// convolutions back to the image channels.
class Tokenizer {
 public:
  Tokenizer(TokenizerConfig config, std::uint64_t seed);

  const TokenizerConfig& config() const noexcept { return config_; }
  Codebook& codebook() noexcept { return codebook_; }
  const Codebook& codebook() const noexcept { return codebook_; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  /// Last decoder layer weights, where the adaptive weight is measured.
  ad::Parameter& final_decoder_weights() noexcept { return dec3_w_; }

  /// [B, C, H, W] -> [B, D, H/4, W/4]. Throws UsageError for extents not
  /// divisible by 4.
  ad::Var encode(ad::Graph& graph, ad::Var images, bool trainable);
  /// [B, D, h, w] -> [B, C, 4h, 4w]
  ad::Var decode(ad::Graph& graph, ad::Var codes, bool trainable);

  /// Encoder output of one image as [h * w, D] rows.
  ad::Tensor encode_image(const Image& image) const;
  /// Nearest-code grid of one image (usage counters untouched).
  diffusion::TokenGrid tokenize(const Image& image) const;
  /// Decoded image of a fully unmasked token grid; values are not clamped.
  Image decode_tokens(const diffusion::TokenGrid& grid) const;

 private:
  ad::Var run_encoder(ad::Graph& graph, ad::Var images, bool trainable) const;
  ad::Var run_decoder(ad::Graph& graph, ad::Var codes, bool trainable) const;

  TokenizerConfig config_;
  ad::Parameter enc1_w_, enc1_b_, enc2_w_, enc2_b_, enc3_w_, enc3_b_;
  ad::Parameter dec1_w_, dec1_b_, dec2_w_, dec2_b_, dec3_w_, dec3_b_;
  Codebook codebook_;
};

}  // namespace vqad::vq
