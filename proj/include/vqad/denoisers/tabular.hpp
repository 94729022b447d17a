#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "vqad/diffusion/denoiser.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::denoisers {

using diffusion::Token;
using diffusion::TokenGrid;

/// A weighted list of fully unmasked grids of common extents.
struct EnumerableDistribution {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t codes = 0;
  std::vector<std::vector<Token>> items;
  std::vector<double> weights;  // normalized to sum 1

  std::size_t length() const { return height * width; }
  /// Empirical distribution of a dataset (duplicates merged).
  static EnumerableDistribution empirical(std::span<const TokenGrid> dataset);
  void normalize();
  /// Entropy of the joint distribution in nats.
  double entropy() const;
  double probability(std::span<const Token> grid) const;
};

/// Largest enumerable problem accepted by the exact oracles.
inline constexpr std::size_t kMaxTabularLength = 8;
inline constexpr std::size_t kMaxTabularCodes = 4;

/// Bayes-optimal denoiser for an enumerable distribution:
/// p(z0_i = j | z_t) over the items consistent with z_t's unmasked positions.
/// Queries consistent with no item get a uniform row and are counted.
class TabularDenoiser final : public diffusion::Denoiser {
 public:
  explicit TabularDenoiser(EnumerableDistribution dist);

  std::size_t codes() const override { return dist_.codes; }
  std::size_t height() const override { return dist_.height; }
  std::size_t width() const override { return dist_.width; }

  /// Log-probabilities [L * K]; -inf where a code is impossible.
  std::vector<double> logits(std::span<const Token> tokens) const override;
  /// Probabilities [L * K] for the same query.
  std::vector<double> conditional(std::span<const Token> tokens) const;

  std::size_t unmatched_queries() const;
  const EnumerableDistribution& distribution() const noexcept { return dist_; }

 private:
  EnumerableDistribution dist_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, std::vector<double>> cache_;
  mutable std::size_t unmatched_ = 0;
};

TabularDenoiser tabular_fit(std::span<const TokenGrid> dataset);

/// Exact next-token table of an enumerable distribution in raster order:
/// row i of logits is log p(z_i | z_0..z_{i-1}) read from the query's prefix.
class CausalTable final : public diffusion::Denoiser {
 public:
  explicit CausalTable(EnumerableDistribution dist);

  std::size_t codes() const override { return dist_.codes; }
  std::size_t height() const override { return dist_.height; }
  std::size_t width() const override { return dist_.width; }
  std::vector<double> logits(std::span<const Token> tokens) const override;

 private:
  EnumerableDistribution dist_;
};

}  // namespace vqad::denoisers
