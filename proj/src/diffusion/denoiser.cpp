#include "vqad/diffusion/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vqad/error.hpp"

namespace vqad::diffusion {

std::vector<std::vector<double>> Denoiser::logits_batch(std::span<const std::vector<Token>> grids) const {
  std::vector<std::vector<double>> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(logits(g));
  return out;
}

std::vector<double> CountingDenoiser::logits(std::span<const Token> tokens) const {
  ++calls_;
  return inner_.logits(tokens);
}

std::vector<std::vector<double>> CountingDenoiser::logits_batch(
    std::span<const std::vector<Token>> grids) const {
  calls_ += grids.size();
  return inner_.logits_batch(grids);
}

std::vector<double> UniformDenoiser::logits(std::span<const Token> tokens) const {
  if (tokens.size() != length()) throw UsageError("uniform denoiser: wrong sequence length");
  return std::vector<double>(length() * codes_, 0.0);
}

std::vector<double> log_softmax_rows(std::span<const double> logits, std::size_t codes) {
  if (codes == 0 || logits.size() % codes != 0) throw UsageError("log_softmax_rows: ragged logits");
  std::vector<double> out(logits.size());
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < logits.size() / codes; ++r) {
    const double* in = logits.data() + r * codes;
    double peak = neg_inf;
    for (std::size_t c = 0; c < codes; ++c) {
      if (std::isnan(in[c]) || in[c] == std::numeric_limits<double>::infinity()) {
        throw NumericFault("log_softmax_rows: invalid logit at row " + std::to_string(r));
      }
      peak = std::max(peak, in[c]);
    }
    if (peak == neg_inf) throw NumericFault("log_softmax_rows: row " + std::to_string(r) + " has no mass");
    double total = 0.0;
    for (std::size_t c = 0; c < codes; ++c) total += std::exp(in[c] - peak);
    const double log_z = peak + std::log(total);
    for (std::size_t c = 0; c < codes; ++c) out[r * codes + c] = in[c] - log_z;
  }
  return out;
}

}  // namespace vqad::diffusion
