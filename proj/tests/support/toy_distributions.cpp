#include "toy_distributions.hpp"

#include <cmath>

#include "vqad/error.hpp"

namespace vqad::testing {

namespace {
std::size_t power(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp--) r *= base;
  return r;
}
}  // namespace

EnumerableDistribution product_distribution(std::size_t height, std::size_t width,
                                            const std::vector<std::vector<double>>& marginals) {
  EnumerableDistribution d;
  d.height = height;
  d.width = width;
  d.codes = marginals.at(0).size();
  const std::size_t L = height * width;
  if (marginals.size() != L) throw UsageError("product_distribution: need one marginal per position");
  for (std::size_t idx = 0; idx < power(d.codes, L); ++idx) {
    auto grid = diffusion::grid_from_index(idx, L, d.codes);
    double p = 1.0;
    for (std::size_t i = 0; i < L; ++i) p *= marginals[i][grid[i]];
    d.items.push_back(std::move(grid));
    d.weights.push_back(p);
  }
  d.normalize();
  return d;
}

EnumerableDistribution markov_chain(std::size_t height, std::size_t width, std::size_t codes, double stay) {
  EnumerableDistribution d;
  d.height = height;
  d.width = width;
  d.codes = codes;
  const std::size_t L = height * width;
  const double move = (1.0 - stay) / static_cast<double>(codes - 1);
  for (std::size_t idx = 0; idx < power(codes, L); ++idx) {
    auto grid = diffusion::grid_from_index(idx, L, codes);
    double p = 1.0 / static_cast<double>(codes);
    for (std::size_t i = 1; i < L; ++i) p *= grid[i] == grid[i - 1] ? stay : move;
    d.items.push_back(std::move(grid));
    d.weights.push_back(p);
  }
  d.normalize();
  return d;
}

EnumerableDistribution uniform_distribution(std::size_t height, std::size_t width, std::size_t codes) {
  return markov_chain(height, width, codes, 1.0 / static_cast<double>(codes));
}

double entropy_rate_bits(const EnumerableDistribution& dist) {
  return dist.entropy() / (static_cast<double>(dist.length()) * std::log(2.0));
}

TokenGrid draw(const EnumerableDistribution& dist, diffusion::Rng& rng) {
  const std::size_t n = rng.categorical(dist.weights);
  return TokenGrid(dist.height, dist.width, dist.codes, dist.items[n]);
}

std::vector<TokenGrid> draw_many(const EnumerableDistribution& dist, std::size_t n, diffusion::Rng& rng) {
  std::vector<TokenGrid> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(draw(dist, rng));
  return out;
}

std::vector<double> dense_law(const EnumerableDistribution& dist) {
  std::vector<double> law(power(dist.codes, dist.length()), 0.0);
  for (std::size_t n = 0; n < dist.items.size(); ++n) {
    law[diffusion::grid_index(dist.items[n], dist.codes)] += dist.weights[n];
  }
  return law;
}

}  // namespace vqad::testing
