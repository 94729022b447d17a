#include "vqad/denoisers/tabular.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "vqad/error.hpp"

namespace vqad::denoisers {

namespace {

void check_enumerable(const EnumerableDistribution& d) {
  if (d.length() == 0 || d.length() > kMaxTabularLength || d.codes < 2 || d.codes > kMaxTabularCodes) {
    throw UsageError("tabular oracle: needs h*w <= " + std::to_string(kMaxTabularLength) + " and K <= " +
                     std::to_string(kMaxTabularCodes) + " (got L=" + std::to_string(d.length()) +
                     ", K=" + std::to_string(d.codes) + ")");
  }
  if (d.items.empty() || d.items.size() != d.weights.size()) {
    throw UsageError("tabular oracle: empty or ragged distribution");
  }
  for (const auto& item : d.items) {
    if (item.size() != d.length()) throw UsageError("tabular oracle: item of wrong length");
    for (Token v : item) {
      if (v < 0 || static_cast<std::size_t>(v) >= d.codes) throw UsageError("tabular oracle: item holds MASK");
    }
  }
}

bool consistent(std::span<const Token> item, std::span<const Token> query, Token mask) {
  for (std::size_t i = 0; i < item.size(); ++i) {
    if (query[i] != mask && query[i] != item[i]) return false;
  }
  return true;
}

std::vector<double> to_log(const std::vector<double>& probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] > 0.0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

EnumerableDistribution EnumerableDistribution::empirical(std::span<const TokenGrid> dataset) {
  if (dataset.empty()) throw UsageError("tabular_fit: empty dataset");
  std::map<std::vector<Token>, double> counts;
  for (const auto& g : dataset) {
    if (g.height != dataset[0].height || g.width != dataset[0].width || g.codes != dataset[0].codes) {
      throw UsageError("tabular_fit: grids with different extents");
    }
    if (!g.fully_unmasked()) throw UsageError("tabular_fit: dataset grid contains MASK");
    counts[g.values] += 1.0;
  }
  EnumerableDistribution d;
  d.height = dataset[0].height;
  d.width = dataset[0].width;
  d.codes = dataset[0].codes;
  for (auto& [item, c] : counts) {
    d.items.push_back(item);
    d.weights.push_back(c);
  }
  d.normalize();
  return d;
}

void EnumerableDistribution::normalize() {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw UsageError("distribution: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw UsageError("distribution: no mass");
  for (double& w : weights) w /= total;
}

double EnumerableDistribution::entropy() const {
  double h = 0.0;
  for (double w : weights) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

double EnumerableDistribution::probability(std::span<const Token> grid) const {
  double p = 0.0;
  for (std::size_t n = 0; n < items.size(); ++n) {
    if (std::equal(items[n].begin(), items[n].end(), grid.begin(), grid.end())) p += weights[n];
  }
  return p;
}

TabularDenoiser::TabularDenoiser(EnumerableDistribution dist) : dist_(std::move(dist)) {
  check_enumerable(dist_);
  dist_.normalize();
}

std::vector<double> TabularDenoiser::conditional(std::span<const Token> tokens) const {
  const std::size_t L = dist_.length(), K = dist_.codes;
  if (tokens.size() != L) throw UsageError("tabular oracle: query of wrong length");
  std::uint64_t key = 0;
  for (std::size_t i = L; i-- > 0;) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) > K) {
      throw UsageError("tabular oracle: token out of range");
    }
    key = key * (K + 1) + static_cast<std::uint64_t>(tokens[i]);
  }
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  std::vector<double> probs(L * K, 0.0);
  double total = 0.0;
  for (std::size_t n = 0; n < dist_.items.size(); ++n) {
    if (dist_.weights[n] == 0.0 || !consistent(dist_.items[n], tokens, static_cast<Token>(K))) continue;
    total += dist_.weights[n];
    for (std::size_t i = 0; i < L; ++i) probs[i * K + dist_.items[n][i]] += dist_.weights[n];
  }
  std::lock_guard lock(mutex_);
  if (total > 0.0) {
    for (double& p : probs) p /= total;
  } else {
    for (double& p : probs) p = 1.0 / static_cast<double>(K);
    ++unmatched_;
  }
  cache_.emplace(key, probs);
  return probs;
}

std::vector<double> TabularDenoiser::logits(std::span<const Token> tokens) const {
  return to_log(conditional(tokens));
}

std::size_t TabularDenoiser::unmatched_queries() const {
  std::lock_guard lock(mutex_);
  return unmatched_;
}

TabularDenoiser tabular_fit(std::span<const TokenGrid> dataset) {
  return TabularDenoiser(EnumerableDistribution::empirical(dataset));
}

CausalTable::CausalTable(EnumerableDistribution dist) : dist_(std::move(dist)) {
  check_enumerable(dist_);
  dist_.normalize();
}

std::vector<double> CausalTable::logits(std::span<const Token> tokens) const {
  const std::size_t L = dist_.length(), K = dist_.codes;
  if (tokens.size() != L) throw UsageError("causal table: query of wrong length");
  std::vector<double> probs(L * K, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    double total = 0.0;
    for (std::size_t n = 0; n < dist_.items.size(); ++n) {
      const auto& item = dist_.items[n];
      if (!std::equal(item.begin(), item.begin() + i, tokens.begin())) continue;
      probs[i * K + item[i]] += dist_.weights[n];
      total += dist_.weights[n];
    }
    for (std::size_t j = 0; j < K; ++j) {
      probs[i * K + j] = total > 0.0 ? probs[i * K + j] / total : 1.0 / static_cast<double>(K);
    }
  }
  return to_log(probs);
}

}  // namespace vqad::denoisers
