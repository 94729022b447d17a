#include "vqad/denoisers/transformer.hpp"

#include <cmath>
#include <random>

#include "vqad/autodiff/ops.hpp"
#include "vqad/error.hpp"

namespace vqad::denoisers {

void TransformerConfig::validate() const {
  if (codes < 2) throw UsageError("transformer: need at least 2 codes");
  if (length() == 0) throw UsageError("transformer: empty grid");
  if (layers == 0 || heads == 0 || head_dim == 0 || ff == 0) {
    throw UsageError("transformer: layers, heads, head_dim and ff must be positive");
  }
}

namespace {

template <typename T>
ad::BasicParameter<T> normal_param(std::string name, ad::Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  ad::BasicTensor<T> value(std::move(shape));
  for (auto& v : value.data()) v = static_cast<T>(dist(rng));
  return ad::BasicParameter<T>(std::move(name), std::move(value));
}

template <typename T>
ad::BasicParameter<T> const_param(std::string name, ad::Shape shape, double fill) {
  return ad::BasicParameter<T>(std::move(name), ad::BasicTensor<T>(std::move(shape), static_cast<T>(fill)));
}

}  // namespace

template <typename T>
BasicTransformer<T>::BasicTransformer(TransformerConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t D = config_.model_width(), F = config_.ff, K = config_.codes, L = config_.length();
  const double w_std = 1.0 / std::sqrt(static_cast<double>(D));
  const double residual_std = w_std / std::sqrt(2.0 * static_cast<double>(config_.layers));
  token_embedding_ = normal_param<T>("tok_emb", {K + 2, D}, 0.02, rng);
  position_embedding_ = normal_param<T>("pos_emb", {L, D}, 0.02, rng);
  layers_.reserve(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    layers_.push_back(Layer{
        const_param<T>(p + "ln1.g", {D}, 1.0), const_param<T>(p + "ln1.b", {D}, 0.0),
        normal_param<T>(p + "wq", {D, D}, w_std, rng), normal_param<T>(p + "wk", {D, D}, w_std, rng),
        normal_param<T>(p + "wv", {D, D}, w_std, rng), normal_param<T>(p + "wo", {D, D}, residual_std, rng),
        const_param<T>(p + "bo", {D}, 0.0), const_param<T>(p + "ln2.g", {D}, 1.0),
        const_param<T>(p + "ln2.b", {D}, 0.0), normal_param<T>(p + "ff1.w", {D, F}, w_std, rng),
        const_param<T>(p + "ff1.b", {F}, 0.0),
        normal_param<T>(p + "ff2.w", {F, D}, residual_std * std::sqrt(static_cast<double>(D) / F), rng),
        const_param<T>(p + "ff2.b", {D}, 0.0)});
  }
  final_gain_ = const_param<T>("ln_f.g", {D}, 1.0);
  final_bias_ = const_param<T>("ln_f.b", {D}, 0.0);
  head_w_ = config_.zero_init_head ? const_param<T>("head.w", {D, K}, 0.0)
                                   : normal_param<T>("head.w", {D, K}, 0.02, rng);
  head_b_ = const_param<T>("head.b", {K}, 0.0);
}

template <typename T>
std::vector<ad::BasicParameter<T>*> BasicTransformer<T>::parameters() {
  std::vector<ad::BasicParameter<T>*> out{&token_embedding_};
  if (config_.position_embeddings) out.push_back(&position_embedding_);
  for (auto& l : layers_) {
    for (auto* p : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.wk, &l.wv, &l.wo, &l.bo, &l.ln2_gain, &l.ln2_bias,
                    &l.ff1_w, &l.ff1_b, &l.ff2_w, &l.ff2_b}) {
      out.push_back(p);
    }
  }
  for (auto* p : {&final_gain_, &final_bias_, &head_w_, &head_b_}) out.push_back(p);
  return out;
}

template <typename T>
std::vector<const ad::BasicParameter<T>*> BasicTransformer<T>::parameters() const {
  auto mutable_params = const_cast<BasicTransformer*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template <typename T>
ad::BasicParameter<T>& BasicTransformer<T>::parameter(const std::string& name) {
  for (auto* p : parameters()) {
    if (p->name == name) return *p;
  }
  throw UsageError("transformer: no parameter named '" + name + "'");
}

template <typename T>
template <typename Bind>
ad::BasicVar<T> BasicTransformer<T>::run(ad::BasicGraph<T>&, std::span<const Token> tokens,
                                         std::size_t batch, Bind bind) const {
  const std::size_t L = config_.length(), K = config_.codes;
  if (batch == 0 || tokens.size() != batch * L) {
    throw UsageError("transformer: expected " + std::to_string(batch) + " x " + std::to_string(L) +
                     " tokens, got " + std::to_string(tokens.size()));
  }
  std::vector<std::int32_t> ids(tokens.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      const Token v = tokens[b * L + i];
      if (v < 0 || static_cast<std::size_t>(v) > K) {
        throw UsageError("transformer: token " + std::to_string(v) + " at position " + std::to_string(i) +
                         " outside [0, " + std::to_string(K) + "]");
      }
      if (config_.causal) {
        // shift right: row i embeds token i-1, row 0 the START symbol
        ids[b * L + i] = i == 0 ? static_cast<std::int32_t>(K + 1) : tokens[b * L + i - 1];
      } else {
        ids[b * L + i] = v;
      }
    }
  }
  auto x = ad::embedding(bind(token_embedding_), ids);
  if (config_.position_embeddings) x = ad::add_tiled(x, bind(position_embedding_));
  for (const auto& l : layers_) {
    auto h = ad::layer_norm(x, bind(l.ln1_gain), bind(l.ln1_bias));
    auto att = ad::attention(ad::matmul(h, bind(l.wq)), ad::matmul(h, bind(l.wk)), ad::matmul(h, bind(l.wv)),
                             batch, config_.heads, config_.causal);
    x = ad::add(x, ad::add_bias(ad::matmul(att, bind(l.wo)), bind(l.bo)));
    auto h2 = ad::layer_norm(x, bind(l.ln2_gain), bind(l.ln2_bias));
    auto f = ad::gelu(ad::add_bias(ad::matmul(h2, bind(l.ff1_w)), bind(l.ff1_b)));
    x = ad::add(x, ad::add_bias(ad::matmul(f, bind(l.ff2_w)), bind(l.ff2_b)));
  }
  auto h = ad::layer_norm(x, bind(final_gain_), bind(final_bias_));
  return ad::add_bias(ad::matmul(h, bind(head_w_)), bind(head_b_));
}

template <typename T>
ad::BasicVar<T> BasicTransformer<T>::forward(ad::BasicGraph<T>& g, std::span<const Token> tokens,
                                             std::size_t batch) {
  return run(g, tokens, batch, [&g](const ad::BasicParameter<T>& p) {
    return g.parameter(const_cast<ad::BasicParameter<T>&>(p));
  });
}

template <typename T>
ad::BasicVar<T> BasicTransformer<T>::evaluate(ad::BasicGraph<T>& g, std::span<const Token> tokens,
                                              std::size_t batch) const {
  return run(g, tokens, batch, [&g](const ad::BasicParameter<T>& p) { return g.constant(p.value); });
}

template <typename T>
std::vector<double> BasicTransformer<T>::logits(std::span<const Token> tokens) const {
  ad::BasicGraph<T> g;
  const auto& value = evaluate(g, tokens, 1).value();
  return std::vector<double>(value.data().begin(), value.data().end());
}

template <typename T>
std::vector<std::vector<double>> BasicTransformer<T>::logits_batch(
    std::span<const std::vector<Token>> grids) const {
  constexpr std::size_t kChunk = 64;
  const std::size_t L = config_.length(), K = config_.codes;
  std::vector<std::vector<double>> out;
  out.reserve(grids.size());
  for (std::size_t start = 0; start < grids.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, grids.size() - start);
    std::vector<Token> tokens;
    tokens.reserve(n * L);
    for (std::size_t b = 0; b < n; ++b) {
      if (grids[start + b].size() != L) throw UsageError("transformer: grid of wrong length in batch");
      tokens.insert(tokens.end(), grids[start + b].begin(), grids[start + b].end());
    }
    ad::BasicGraph<T> g;
    const auto& value = evaluate(g, tokens, n).value();
    for (std::size_t b = 0; b < n; ++b) {
      const T* row = value.raw() + b * L * K;
      out.emplace_back(row, row + L * K);
    }
  }
  return out;
}

template class BasicTransformer<float>;
template class BasicTransformer<double>;

}  // namespace vqad::denoisers
