#include "vqad/vq/codebook.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vqad/autodiff/ops.hpp"
#include "vqad/error.hpp"

namespace vqad::vq {

Codebook::Codebook(ad::Tensor values) : entries("codebook", std::move(values)) {
  validate();
  reset_usage();
}

Codebook Codebook::uniform(std::size_t codes, std::size_t dim, diffusion::Rng& rng) {
  if (codes < 2 || dim == 0) throw UsageError("codebook: need K >= 2 and D >= 1");
  const double bound = 1.0 / static_cast<double>(codes);
  ad::Tensor t({codes, dim});
  for (auto& v : t.data()) v = static_cast<float>(-bound + 2.0 * bound * rng.uniform());
  return Codebook(std::move(t));
}

void Codebook::validate() const {
  if (entries.value.rank() != 2 || entries.value.dim(0) < 2 || entries.value.dim(1) == 0) {
    throw UsageError("codebook: entries must be [K >= 2, D >= 1], got " + ad::shape_string(entries.value.shape()));
  }
  if (!entries.value.all_finite()) throw NumericFault("codebook: non-finite entry");
}

std::vector<std::int32_t> nearest_codes(const ad::Tensor& rows, const ad::Tensor& entries) {
  if (rows.rank() != 2 || entries.rank() != 2 || rows.dim(1) != entries.dim(1)) {
    throw UsageError("quantize: rows " + ad::shape_string(rows.shape()) + " do not match codebook " +
                     ad::shape_string(entries.shape()));
  }
  const std::size_t N = rows.dim(0), K = entries.dim(0), D = rows.dim(1);
  std::vector<std::int32_t> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < K; ++k) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = static_cast<double>(rows[n * D + d]) - entries[k * D + d];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        arg = k;
      }
    }
    if (!std::isfinite(best)) throw NumericFault("quantize: non-finite encoder output at row " + std::to_string(n));
    out[n] = static_cast<std::int32_t>(arg);
  }
  return out;
}

Quantized quantize(const ad::Tensor& rows, Codebook& codebook) {
  Quantized q;
  q.indices = nearest_codes(rows, codebook.entries.value);
  const std::size_t D = codebook.dim();
  q.quantized = ad::Tensor({q.indices.size(), D});
  if (codebook.usage.size() != codebook.size()) codebook.reset_usage();
  for (std::size_t n = 0; n < q.indices.size(); ++n) {
    const auto k = static_cast<std::size_t>(q.indices[n]);
    for (std::size_t d = 0; d < D; ++d) q.quantized[n * D + d] = codebook.entries.value[k * D + d];
    ++codebook.usage[k];
  }
  return q;
}

CodebookUsage codebook_usage(std::span<const std::uint64_t> counts) {
  double total = 0.0;
  std::size_t used = 0;
  for (auto c : counts) {
    total += static_cast<double>(c);
    used += c > 0;
  }
  if (counts.empty() || total == 0.0) throw UsageError("codebook usage: no codes have been counted");
  double entropy = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    entropy -= p * std::log(p);
  }
  return {static_cast<double>(used) / static_cast<double>(counts.size()), std::exp(entropy)};
}

double adaptive_lambda(double grad_norm_rec, double grad_norm_g, double delta, double lambda_max) {
  if (grad_norm_rec < 0 || grad_norm_g < 0 || !(delta > 0) || !(lambda_max > 0)) {
    throw UsageError("adaptive_lambda: norms must be >= 0 and delta, lambda_max > 0");
  }
  return std::min(grad_norm_rec / (grad_norm_g + delta), lambda_max);
}

VqLoss vq_loss(ad::Var x, ad::Var x_hat, ad::Var e, ad::Var z_q, float beta) {
  if (e.shape() != z_q.shape() || e.shape().size() != 2) throw UsageError("vq_loss: e and z_q must be equal [N, D]");
  const float per_position = 1.0f / static_cast<float>(e.shape()[0]);
  VqLoss out;
  out.rec = ad::mse(x_hat, x);
  out.codebook = ad::scale(ad::sum_squares(ad::sub(ad::stop_gradient(e), z_q)), per_position);
  out.commit = ad::scale(ad::sum_squares(ad::sub(ad::stop_gradient(z_q), e)), beta * per_position);
  out.total = ad::add(ad::add(out.rec, out.codebook), out.commit);
  if (!std::isfinite(out.total.value().item())) throw NumericFault("vq_loss: loss is not finite");
  return out;
}

}  // namespace vqad::vq
