#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vqad/autodiff/graph.hpp"
#include "vqad/autodiff/tensor.hpp"
#include "vqad/diffusion/rng.hpp"

namespace vqad::vq {

/// K entries of dimension D with hit counters since the last reset.
struct Codebook {
  ad::Parameter entries;  // [K, D]
  std::vector<std::uint64_t> usage;

  Codebook() = default;
  explicit Codebook(ad::Tensor entries);
  /// Entries i.i.d. uniform in [-1/K, 1/K].
  static Codebook uniform(std::size_t codes, std::size_t dim, diffusion::Rng& rng);

  std::size_t size() const { return entries.value.dim(0); }
  std::size_t dim() const { return entries.value.dim(1); }
  void reset_usage() { usage.assign(size(), 0); }
  void validate() const;
};

/// Index of the nearest entry (squared Euclidean) for each row of
/// rows [N, D]; ties go to the lowest index.
std::vector<std::int32_t> nearest_codes(const ad::Tensor& rows, const ad::Tensor& entries);

struct Quantized {
  std::vector<std::int32_t> indices;
  ad::Tensor quantized;  // [N, D], exact copies of the chosen entries
};

/// nearest_codes plus the chosen vectors; bumps the usage counters.
Quantized quantize(const ad::Tensor& rows, Codebook& codebook);

struct CodebookUsage {
  double fraction_used = 0.0;
  double perplexity = 0.0;
};
/// Fraction of nonzero counters and exp(entropy) of the normalized counts.
CodebookUsage codebook_usage(std::span<const std::uint64_t> counts);

/// min(rec / (g + delta), lambda_max).
double adaptive_lambda(double grad_norm_rec, double grad_norm_g, double delta, double lambda_max);

struct VqLoss {
  ad::Var total, rec, codebook, commit;
};
/// Pixel MSE plus |sg[e] - z_q|^2 plus beta |sg[z_q] - e|^2, the squared
/// norms summed over the code dimension and averaged over positions.
/// e and z_q are [N, D] rows. Throws NumericFault if the value is not finite.
VqLoss vq_loss(ad::Var x, ad::Var x_hat, ad::Var e, ad::Var z_q, float beta);

}  // namespace vqad::vq
