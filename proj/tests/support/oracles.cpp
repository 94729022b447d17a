#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "vqad/error.hpp"

namespace vqad::testing {

std::vector<double> naive_log_softmax(std::span<const double> logits, std::size_t codes) {
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r * codes < logits.size(); ++r) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < codes; ++c) peak = std::max(peak, logits[r * codes + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < codes; ++c) z += std::exp(logits[r * codes + c] - peak);
    for (std::size_t c = 0; c < codes; ++c) out[r * codes + c] = logits[r * codes + c] - peak - std::log(z);
  }
  return out;
}

double brute_force_elbo(const TokenGrid& z0, const diffusion::Denoiser& denoiser, std::size_t total_steps) {
  const std::size_t L = z0.size(), K = z0.codes;
  double elbo = 0.0;
  for (std::size_t t = 1; t <= total_steps; ++t) {
    const double p = static_cast<double>(t) / static_cast<double>(total_steps);
    for (std::size_t bits = 0; bits < (std::size_t{1} << L); ++bits) {
      double q = 1.0;
      TokenGrid zt = z0;
      for (std::size_t i = 0; i < L; ++i) {
        const bool masked = (bits >> i) & 1;
        q *= masked ? p : 1.0 - p;
        if (masked) zt.values[i] = static_cast<Token>(K);
      }
      if (q == 0.0 || bits == 0) continue;
      const auto logp = naive_log_softmax(denoiser.logits(zt.values), K);
      double ll = 0.0;
      for (std::size_t i = 0; i < L; ++i) {
        if ((bits >> i) & 1) ll += logp[i * K + z0.values[i]];
      }
      elbo += q * ll / static_cast<double>(t);
    }
  }
  return elbo;
}

namespace {

std::vector<double> tempered(std::span<const double> row, double temperature) {
  std::vector<double> p(row.size(), 0.0);
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  if (temperature == 0.0) {
    p[best] = 1.0;
    return p;
  }
  double z = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) z += p[c] = std::exp((row[c] - row[best]) / temperature);
  for (double& v : p) v /= z;
  return p;
}

std::size_t index_of(const std::vector<Token>& grid, std::size_t codes) {
  std::size_t idx = 0;
  for (std::size_t i = grid.size(); i-- > 0;) idx = idx * codes + static_cast<std::size_t>(grid[i]);
  return idx;
}

}  // namespace

std::vector<double> exact_sampler_law(const diffusion::Denoiser& denoiser, std::span<const std::size_t> budget,
                                      double temperature) {
  const std::size_t L = denoiser.length(), K = denoiser.codes();
  const Token mask = static_cast<Token>(K);
  std::map<std::vector<Token>, double> states{{std::vector<Token>(L, mask), 1.0}};
  for (std::size_t k = 0; k < budget.size(); ++k) {
    const std::size_t t = budget[k];
    const std::size_t next_t = k + 1 < budget.size() ? budget[k + 1] : 0;
    const double u = static_cast<double>(t - next_t) / static_cast<double>(t);
    std::map<std::vector<Token>, double> next;
    for (const auto& [z, pz] : states) {
      const auto logits = denoiser.logits(z);
      // each masked position independently: stay masked (1-u) or take code j (u p_j)
      std::vector<std::vector<std::pair<Token, double>>> options(L);
      for (std::size_t i = 0; i < L; ++i) {
        if (z[i] != mask) {
          options[i] = {{z[i], 1.0}};
          continue;
        }
        const auto p = tempered(std::span<const double>(logits).subspan(i * K, K), temperature);
        if (u < 1.0) options[i].push_back({mask, 1.0 - u});
        for (std::size_t j = 0; j < K; ++j) {
          if (p[j] > 0.0) options[i].push_back({static_cast<Token>(j), u * p[j]});
        }
      }
      std::vector<std::size_t> choice(L, 0);
      while (true) {
        std::vector<Token> out(L);
        double p = pz;
        for (std::size_t i = 0; i < L; ++i) {
          out[i] = options[i][choice[i]].first;
          p *= options[i][choice[i]].second;
        }
        next[out] += p;
        std::size_t pos = 0;
        while (pos < L && ++choice[pos] == options[pos].size()) choice[pos++] = 0;
        if (pos == L) break;
      }
    }
    states = std::move(next);
  }
  std::vector<double> law(static_cast<std::size_t>(std::pow(K, L) + 0.5), 0.0);
  for (const auto& [z, p] : states) {
    for (Token v : z) {
      if (v == mask) throw std::logic_error("exact_sampler_law: budget leaves MASK tokens");
    }
    law[index_of(z, K)] += p;
  }
  return law;
}

std::vector<double> exact_ar_law(const diffusion::Denoiser& causal) {
  const std::size_t L = causal.length(), K = causal.codes();
  std::map<std::vector<Token>, double> prefixes{{std::vector<Token>(L, static_cast<Token>(K)), 1.0}};
  for (std::size_t i = 0; i < L; ++i) {
    std::map<std::vector<Token>, double> next;
    for (const auto& [z, pz] : prefixes) {
      const auto logits = causal.logits(z);
      const auto p = tempered(std::span<const double>(logits).subspan(i * K, K), 1.0);
      for (std::size_t j = 0; j < K; ++j) {
        if (p[j] == 0.0) continue;
        auto out = z;
        out[i] = static_cast<Token>(j);
        next[out] += pz * p[j];
      }
    }
    prefixes = std::move(next);
  }
  std::vector<double> law(static_cast<std::size_t>(std::pow(K, L) + 0.5), 0.0);
  for (const auto& [z, p] : prefixes) law[index_of(z, K)] += p;
  return law;
}

std::vector<double> empirical_law(std::span<const TokenGrid> samples, std::size_t codes) {
  if (samples.empty()) return {};
  std::vector<double> law(static_cast<std::size_t>(std::pow(codes, samples[0].size()) + 0.5), 0.0);
  for (const auto& s : samples) law[index_of(s.values, codes)] += 1.0;
  for (double& v : law) v /= static_cast<double>(samples.size());
  return law;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw UsageError("total_variation: size mismatch");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

std::vector<double> recount_conditional(std::span<const TokenGrid> dataset, std::span<const Token> query,
                                        std::size_t codes) {
  const std::size_t L = query.size();
  std::vector<double> counts(L * codes, 0.0);
  double matches = 0.0;
  for (const auto& g : dataset) {
    bool ok = true;
    for (std::size_t i = 0; i < L && ok; ++i) ok = query[i] == static_cast<Token>(codes) || query[i] == g.values[i];
    if (!ok) continue;
    matches += 1.0;
    for (std::size_t i = 0; i < L; ++i) counts[i * codes + g.values[i]] += 1.0;
  }
  for (double& c : counts) c = matches > 0.0 ? c / matches : 1.0 / static_cast<double>(codes);
  return counts;
}

// Direct recount of the mixture: for each position, loop over every strided
// origin, keep the windows containing it and average their softmax rows.
std::vector<double> brute_force_mixture(const TokenGrid& grid, std::size_t h, std::size_t w, std::size_t stride,
                                        const diffusion::Denoiser& d, double temperature) {
  const std::size_t K = grid.codes;
  std::vector<double> out(grid.size() * K, 0.0);
  for (std::size_t pr = 0; pr < grid.height; ++pr) {
    for (std::size_t pc = 0; pc < grid.width; ++pc) {
      double z = 0.0;
      for (std::size_t r0 = 0; r0 + h <= grid.height; r0 += stride) {
        for (std::size_t c0 = 0; c0 + w <= grid.width; c0 += stride) {
          if (pr < r0 || pr >= r0 + h || pc < c0 || pc >= c0 + w) continue;
          std::vector<Token> crop;
          for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) crop.push_back(grid.at(r0 + r, c0 + c));
          }
          auto logits = d.logits(crop);
          for (auto& l : logits) l /= temperature;
          const auto logp = naive_log_softmax(logits, K);
          const std::size_t row = (pr - r0) * w + (pc - c0);
          for (std::size_t j = 0; j < K; ++j) out[(pr * grid.width + pc) * K + j] += std::exp(logp[row * K + j]);
          z += 1;
        }
      }
      for (std::size_t j = 0; j < K; ++j) out[(pr * grid.width + pc) * K + j] /= z;
    }
  }
  return out;
}

namespace {

double sq(const metrics::PointCloud& a, std::size_t i, const metrics::PointCloud& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.d; ++t) {
    const double diff = static_cast<double>(a.values[i * a.d + t]) - b.values[j * b.d + t];
    s += diff * diff;
  }
  return s;
}

}  // namespace

// k-th smallest squared distance to the other points, by full sort.
std::vector<double> oracle_radii_sq(const metrics::PointCloud& c, std::size_t k) {
  std::vector<double> out(c.n);
  for (std::size_t i = 0; i < c.n; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < c.n; ++j) {
      if (j != i) d.push_back(sq(c, i, c, j));
    }
    std::sort(d.begin(), d.end());
    out[i] = d[k - 1];
  }
  return out;
}

metrics::Prdc oracle_prdc(const metrics::PointCloud& real, const metrics::PointCloud& fake, std::size_t k) {
  const auto rr = oracle_radii_sq(real, k), rf = oracle_radii_sq(fake, k);
  metrics::Prdc p;
  for (std::size_t j = 0; j < fake.n; ++j) {
    std::size_t inside = 0;
    for (std::size_t i = 0; i < real.n; ++i) inside += sq(fake, j, real, i) <= rr[i];
    p.precision += inside > 0;
    p.density += static_cast<double>(inside);
  }
  for (std::size_t i = 0; i < real.n; ++i) {
    bool recalled = false;
    double nearest = INFINITY;
    for (std::size_t j = 0; j < fake.n; ++j) {
      const double d = sq(real, i, fake, j);
      recalled = recalled || d <= rf[j];
      nearest = std::min(nearest, d);
    }
    p.recall += recalled;
    p.coverage += nearest <= rr[i];
  }
  p.precision /= static_cast<double>(fake.n);
  p.density /= static_cast<double>(k * fake.n);
  p.recall /= static_cast<double>(real.n);
  p.coverage /= static_cast<double>(real.n);
  return p;
}

}  // namespace vqad::testing
