#include "vqad/diffusion/masking.hpp"

#include "vqad/error.hpp"

namespace vqad::diffusion {

namespace {
void check_t(std::size_t t, std::size_t total_steps, const char* op) {
  if (total_steps == 0) throw UsageError(std::string(op) + ": T must be positive");
  if (t > total_steps) {
    throw UsageError(std::string(op) + ": t=" + std::to_string(t) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  }
}
}  // namespace

TokenGrid forward_mask(const TokenGrid& z0, std::size_t t, std::size_t total_steps, Rng& rng) {
  check_t(t, total_steps, "forward_mask");
  TokenGrid zt = z0;
  if (t == 0) return zt;
  const double p = static_cast<double>(t) / static_cast<double>(total_steps);
  for (auto& v : zt.values) {
    if (rng.uniform() < p) v = zt.mask();
  }
  return zt;
}

TokenGrid mask_further(const TokenGrid& zs, std::size_t s, std::size_t t, std::size_t total_steps,
                       Rng& rng) {
  check_t(t, total_steps, "mask_further");
  if (s > t) throw UsageError("mask_further: s must not exceed t");
  TokenGrid zt = zs;
  if (s == t) return zt;
  const double p = static_cast<double>(t - s) / static_cast<double>(total_steps - s);
  for (auto& v : zt.values) {
    if (v != zt.mask() && rng.uniform() < p) v = zt.mask();
  }
  return zt;
}

void check_consistent(const TokenGrid& z0, const TokenGrid& zt) {
  if (z0.size() != zt.size() || z0.codes != zt.codes) {
    throw UsageError("posterior: z0 and z_t have different extents or vocabularies");
  }
  for (std::size_t i = 0; i < z0.size(); ++i) {
    if (z0.is_masked(i)) throw UsageError("posterior: z0 contains MASK at position " + std::to_string(i));
    if (!zt.is_masked(i) && zt.values[i] != z0.values[i]) {
      throw UsageError("posterior: z_t disagrees with z0 at unmasked position " + std::to_string(i));
    }
  }
}

std::vector<double> posterior_q(const TokenGrid& z0, const TokenGrid& zt, std::size_t t,
                                std::size_t total_steps) {
  check_t(t, total_steps, "posterior_q");
  if (t == 0) throw UsageError("posterior_q: t must be at least 1");
  check_consistent(z0, zt);
  const std::size_t width = z0.codes + 1;
  const double stay_masked = static_cast<double>(t - 1) / static_cast<double>(total_steps);
  std::vector<double> q(z0.size() * width, 0.0);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    double* row = q.data() + i * width;
    if (zt.is_masked(i)) {
      row[z0.values[i]] = 1.0 - stay_masked;
      row[z0.codes] = stay_masked;
    } else {
      row[z0.values[i]] = 1.0;
    }
  }
  return q;
}

}  // namespace vqad::diffusion
