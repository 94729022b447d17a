#include "vqad/vq/tokenizer.hpp"

#include <cmath>
#include <string>

#include "vqad/autodiff/ops.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/error.hpp"

namespace vqad::vq {

namespace {

ad::Parameter normal_param(std::string name, ad::Shape shape, double stddev, diffusion::Rng& rng) {
  ad::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(stddev * rng.normal());
  return ad::Parameter(std::move(name), std::move(t));
}

ad::Parameter zeros(std::string name, ad::Shape shape) { return ad::Parameter(std::move(name), ad::Tensor(std::move(shape))); }

}  // namespace

void TokenizerConfig::validate() const {
  if (channels == 0 || code_dim == 0 || hidden1 == 0 || hidden2 == 0) throw UsageError("tokenizer: zero-sized layer");
  if (codes < 2) throw UsageError("tokenizer: codebook needs K >= 2");
  if (!(beta > 0) || !(lambda_max > 0) || !(delta > 0)) throw UsageError("tokenizer: beta, lambda_max and delta must be > 0");
}

Tokenizer::Tokenizer(TokenizerConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  diffusion::Rng rng(seed, 0x70c);
  const std::size_t C = config_.channels, h1 = config_.hidden1, h2 = config_.hidden2, D = config_.code_dim;
  auto he = [](double fan_in) { return std::sqrt(2.0 / fan_in); };
  enc1_w_ = normal_param("enc1.w", {h1, C, 4, 4}, he(C * 16.0), rng);
  enc1_b_ = zeros("enc1.b", {h1});
  enc2_w_ = normal_param("enc2.w", {h2, h1, 4, 4}, he(h1 * 16.0), rng);
  enc2_b_ = zeros("enc2.b", {h2});
  enc3_w_ = config_.zero_init_final ? zeros("enc3.w", {D, h2, 3, 3})
                                    : normal_param("enc3.w", {D, h2, 3, 3}, 1.0 / std::sqrt(h2 * 9.0), rng);
  enc3_b_ = zeros("enc3.b", {D});
  dec1_w_ = normal_param("dec1.w", {h2, D, 3, 3}, he(D * 9.0), rng);
  dec1_b_ = zeros("dec1.b", {h2});
  // a stride-2 4x4 transposed conv sums 4 taps per output
  dec2_w_ = normal_param("dec2.w", {h2, h1, 4, 4}, he(h2 * 4.0), rng);
  dec2_b_ = zeros("dec2.b", {h1});
  dec3_w_ = normal_param("dec3.w", {h1, C, 4, 4}, 1.0 / std::sqrt(h1 * 4.0), rng);
  dec3_b_ = ad::Parameter("dec3.b", ad::Tensor({C}, 0.5f));
  codebook_ = Codebook::uniform(config_.codes, D, rng);
}

std::vector<ad::Parameter*> Tokenizer::parameters() {
  return {&enc1_w_, &enc1_b_, &enc2_w_, &enc2_b_, &enc3_w_, &enc3_b_, &dec1_w_,
          &dec1_b_, &dec2_w_, &dec2_b_, &dec3_w_, &dec3_b_, &codebook_.entries};
}

std::vector<const ad::Parameter*> Tokenizer::parameters() const {
  auto mut = const_cast<Tokenizer*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

ad::Var Tokenizer::run_encoder(ad::Graph& g, ad::Var x, bool trainable) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != config_.channels) {
    throw UsageError("encode: expected [B, " + std::to_string(config_.channels) + ", H, W], got " + ad::shape_string(s));
  }
  if (s[2] % TokenizerConfig::factor || s[3] % TokenizerConfig::factor || s[2] == 0 || s[3] == 0) {
    throw UsageError("encode: image extents " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                     " are not divisible by " + std::to_string(TokenizerConfig::factor));
  }
  auto bind = [&](const ad::Parameter& p) {
    return trainable ? g.parameter(const_cast<ad::Parameter&>(p)) : g.constant(p.value);
  };
  auto h = ad::relu(ad::conv2d(x, bind(enc1_w_), bind(enc1_b_), 2, 1));
  h = ad::relu(ad::conv2d(h, bind(enc2_w_), bind(enc2_b_), 2, 1));
  return ad::conv2d(h, bind(enc3_w_), bind(enc3_b_), 1, 1);
}

ad::Var Tokenizer::run_decoder(ad::Graph& g, ad::Var z, bool trainable) const {
  const auto& s = z.shape();
  if (s.size() != 4 || s[1] != config_.code_dim) {
    throw UsageError("decode: expected [B, " + std::to_string(config_.code_dim) + ", h, w], got " + ad::shape_string(s));
  }
  auto bind = [&](const ad::Parameter& p) {
    return trainable ? g.parameter(const_cast<ad::Parameter&>(p)) : g.constant(p.value);
  };
  auto h = ad::relu(ad::conv2d(z, bind(dec1_w_), bind(dec1_b_), 1, 1));
  h = ad::relu(ad::conv_transpose2d(h, bind(dec2_w_), bind(dec2_b_), 2, 1));
  return ad::conv_transpose2d(h, bind(dec3_w_), bind(dec3_b_), 2, 1);
}

ad::Var Tokenizer::encode(ad::Graph& graph, ad::Var images, bool trainable) {
  return run_encoder(graph, images, trainable);
}

ad::Var Tokenizer::decode(ad::Graph& graph, ad::Var codes, bool trainable) {
  return run_decoder(graph, codes, trainable);
}

ad::Tensor Tokenizer::encode_image(const Image& image) const {
  ad::Graph g;
  const Image one[] = {image};
  return ad::nchw_to_rows(run_encoder(g, g.constant(to_nchw(one)), false)).value();
}

diffusion::TokenGrid Tokenizer::tokenize(const Image& image) const {
  const auto rows = encode_image(image);
  auto ids = nearest_codes(rows, codebook_.entries.value);
  return diffusion::TokenGrid(image.height / TokenizerConfig::factor, image.width / TokenizerConfig::factor,
                              config_.codes, std::vector<diffusion::Token>(ids.begin(), ids.end()));
}

Image Tokenizer::decode_tokens(const diffusion::TokenGrid& grid) const {
  grid.validate();
  if (grid.codes != config_.codes) throw UsageError("decode: token grid uses a different codebook size");
  if (!grid.fully_unmasked()) throw UsageError("decode: token grid still holds MASK tokens");
  ad::Graph g;
  const auto z = ad::embedding(g.constant(codebook_.entries.value), grid.values);
  const auto out = run_decoder(g, ad::rows_to_nchw(z, 1, grid.height, grid.width), false);
  return from_nchw(out.value(), 0);
}

}  // namespace vqad::vq
