#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "toy_distributions.hpp"
#include "vqad/canvas/canvas.hpp"
#include "vqad/denoisers/tabular.hpp"
#include "vqad/denoisers/transformer.hpp"
#include "vqad/diffusion/schedule.hpp"
#include "vqad/error.hpp"

using namespace vqad;
using namespace vqad::canvas;
using diffusion::Rng;

namespace {

denoisers::TransformerConfig window_model(std::size_t k, std::size_t h, std::size_t w) {
  denoisers::TransformerConfig c;
  c.codes = k;
  c.height = h;
  c.width = w;
  c.layers = 1;
  c.heads = 2;
  c.head_dim = 4;
  c.ff = 16;
  return c;
}

TokenGrid partly_masked(std::size_t h, std::size_t w, std::size_t k, double p_mask, Rng& rng) {
  TokenGrid g(h, w, k);
  for (auto& v : g.values) v = rng.bernoulli(p_mask) ? static_cast<Token>(k) : static_cast<Token>(rng.uniform_int(0, k - 1));
  return g;
}

}  // namespace

TEST_SUITE("aggregate_denoise") {
  TEST_CASE("window-sized canvas reproduces the plain softmax bitwise") {
    const denoisers::Transformer model(window_model(5, 2, 3), 1);
    Rng rng(1);
    for (int n = 0; n < 5; ++n) {
      const TokenGrid g = partly_masked(2, 3, 5, 0.5, rng);
      const Canvas canvas{g, 2, 3, 1};
      for (double temp : {1.0, 0.8}) {
        CHECK(aggregate_denoise(canvas, model, temp) ==
              diffusion::tempered_probabilities(model.logits(g.values), 5, temp));
      }
    }
  }

  TEST_CASE("windows agreeing at an overlap average to the same distribution") {
    const diffusion::UniformDenoiser uniform(4, 2, 2);
    const Canvas canvas{TokenGrid(3, 3, 4), 2, 2, 1};
    for (double v : aggregate_denoise(canvas, uniform)) CHECK(v == 0.25);
  }

  TEST_CASE("strip canvas matches a direct recount of the mixture") {
    const denoisers::Transformer model(window_model(4, 1, 4), 2);
    Rng rng(2);
    for (int n = 0; n < 10; ++n) {
      const TokenGrid g = partly_masked(1, 5, 4, 0.4, rng);
      const auto got = aggregate_denoise(Canvas{g, 1, 4, 1}, model, 0.9);
      const auto expect = testing::brute_force_mixture(g, 1, 4, 1, model, 0.9);
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expect[i]) <= 1e-6);
    }
  }

  TEST_CASE("two-dimensional strided canvases match the recount") {
    const denoisers::Transformer model(window_model(3, 2, 2), 3);
    Rng rng(3);
    for (std::size_t stride : {1, 2}) {
      const TokenGrid g = partly_masked(4, 6, 3, 0.5, rng);
      const auto got = aggregate_denoise(Canvas{g, 2, 2, stride}, model, 1.0);
      const auto expect = testing::brute_force_mixture(g, 2, 2, stride, model, 1.0);
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expect[i]) <= 1e-6);
    }
  }

  TEST_CASE("outputs are distributions for every stride") {
    const denoisers::Transformer model(window_model(4, 2, 3), 4);
    Rng rng(4);
    struct Case {
      std::size_t h, w, stride;
    };
    for (const Case c : {Case{2, 3, 1}, Case{4, 3, 2}, Case{4, 5, 1}, Case{6, 7, 2}, Case{4, 7, 2}}) {
      const TokenGrid g = partly_masked(c.h, c.w, 4, 0.6, rng);
      const auto p = aggregate_denoise(Canvas{g, 2, 3, c.stride}, model, 0.8);
      for (std::size_t pos = 0; pos < g.size(); ++pos) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
          CHECK(p[pos * 4 + j] >= 0.0);
          s += p[pos * 4 + j];
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
    }
  }

  TEST_CASE("denoiser window must match the canvas window") {
    const diffusion::UniformDenoiser uniform(4, 2, 2);
    CHECK_THROWS_AS(aggregate_denoise(Canvas{TokenGrid(3, 3, 4), 3, 3, 1}, uniform), UsageError);
  }
}

TEST_SUITE("windows") {
  TEST_CASE("coverage counts agree with a naive double loop") {
    for (std::size_t a = 2; a <= 7; ++a) {
      for (std::size_t b = 3; b <= 8; ++b) {
        for (std::size_t stride = 1; stride <= 2; ++stride) {
          const Canvas canvas{TokenGrid(a, b, 2), 2, 3, stride};
          std::vector<Window> windows;
          try {
            windows = window_origins(canvas);
          } catch (const UsageError&) {
            continue;
          }
          const auto z = coverage_counts(canvas, windows);
          for (std::size_t r = 0; r < a; ++r) {
            for (std::size_t c = 0; c < b; ++c) {
              std::size_t count = 0;
              for (std::size_t r0 = 0; r0 + 2 <= a; r0 += stride) {
                for (std::size_t c0 = 0; c0 + 3 <= b; c0 += stride) count += r >= r0 && r < r0 + 2 && c >= c0 && c < c0 + 3;
              }
              CHECK(z[r * b + c] == count);
              CHECK(count >= 1);
            }
          }
        }
      }
    }
  }

  TEST_CASE("a stride leaving positions uncovered is a usage error") {
    CHECK_THROWS_AS(window_origins(Canvas{TokenGrid(8, 6, 4), 6, 6, 4}), UsageError);
    CHECK_NOTHROW(window_origins(Canvas{TokenGrid(12, 6, 4), 6, 6, 6}));
  }

  TEST_CASE("stride outside [1, window] and undersized canvases are usage errors") {
    CHECK_THROWS_AS(window_origins(Canvas{TokenGrid(6, 6, 4), 6, 6, 0}), UsageError);
    CHECK_THROWS_AS(window_origins(Canvas{TokenGrid(12, 6, 4), 6, 6, 7}), UsageError);
    CHECK_THROWS_AS(window_origins(Canvas{TokenGrid(5, 6, 4), 6, 6, 1}), UsageError);
  }

  TEST_CASE("random subsets cover every position and never fall below the uniform rate") {
    Canvas canvas{TokenGrid(6, 6, 2), 2, 2, 1};
    canvas.window_subset = 10;
    Rng rng(5);
    const auto all = window_origins(canvas);
    std::vector<double> hits(all.size(), 0.0);
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      const auto picked = select_windows(canvas, &rng);
      CHECK(picked.size() >= 10);
      for (auto z : coverage_counts(canvas, picked)) CHECK(z >= 1);
      for (const auto& w : picked) hits[static_cast<std::size_t>(std::find(all.begin(), all.end(), w) - all.begin())] += 1;
    }
    // corner positions have a single covering window; every other window is
    // in the uniform draw at rate 10/25 and topping up only adds to that
    for (std::size_t i : {0, 4, 20, 24}) CHECK(hits[i] == n);
    for (double h : hits) CHECK(h / n > 0.4 - 4 * std::sqrt(0.4 * 0.6 / n));
  }

  TEST_CASE("a random subset without a stream is a usage error") {
    Canvas canvas{TokenGrid(6, 6, 2), 2, 2, 1};
    canvas.window_subset = 3;
    CHECK_THROWS_AS(select_windows(canvas, nullptr), UsageError);
  }
}

TEST_SUITE("sample_large") {
  TEST_CASE("window-sized extents reproduce plain sampling bitwise") {
    const denoisers::Transformer model(window_model(6, 3, 3), 6);
    const auto budget = diffusion::make_step_budget(9, 4);
    Rng a(6), b(6);
    LargeCanvasOptions options;
    options.temperature = 0.9;
    CHECK(sample_large(3, 3, model, budget, options, a) == diffusion::sample(model, budget, 0.9, b));
  }

  TEST_CASE("12x6 canvas on a 6x6 window completes with no MASK left") {
    const denoisers::Transformer model(window_model(8, 6, 6), 7);
    Rng rng(7);
    diffusion::SampleStats stats;
    const auto z = sample_large(12, 6, model, diffusion::make_step_budget(72, 24), {}, rng, &stats);
    CHECK(z.height == 12);
    CHECK(z.fully_unmasked());
    CHECK(stats.steps == 24);
  }

  TEST_CASE("non-overlapping tiling and window subsets also complete") {
    const denoisers::Transformer model(window_model(4, 2, 2), 8);
    Rng rng(8);
    LargeCanvasOptions tiled;
    tiled.stride = 2;
    CHECK(sample_large(4, 6, model, diffusion::make_step_budget(24, 8), tiled, rng).fully_unmasked());
    LargeCanvasOptions subset;
    subset.window_subset = 3;
    CHECK(sample_large(4, 6, model, diffusion::make_step_budget(24, 8), subset, rng).fully_unmasked());
  }

  TEST_CASE("large canvases default to temperature 0.8") { CHECK(LargeCanvasOptions{}.temperature == 0.8); }

  TEST_CASE("budget must start at a * b") {
    const diffusion::UniformDenoiser uniform(4, 2, 2);
    Rng rng(9);
    CHECK_THROWS_AS(sample_large(4, 2, uniform, diffusion::make_step_budget(4, 4), {}, rng), UsageError);
  }
}

TEST_SUITE("inpaint") {
  TEST_CASE("empty region returns the input") {
    const denoisers::Transformer model(window_model(4, 2, 3), 10);
    const TokenGrid z(2, 3, 4, {0, 1, 2, 3, 0, 1});
    Rng rng(10);
    diffusion::SampleStats stats;
    CHECK(inpaint(z, RegionMask{2, 3, std::vector<std::uint8_t>(6, 0)}, model, {}, rng, &stats) == z);
    CHECK(stats.denoiser_calls == 0);
  }

  TEST_CASE("full region is an unconditional sample") {
    const denoisers::Transformer model(window_model(4, 2, 3), 11);
    const TokenGrid z(2, 3, 4, {0, 1, 2, 3, 0, 1});
    Rng a(11), b(11);
    InpaintOptions options;
    options.temperature = 0.9;
    CHECK(inpaint(z, RegionMask{2, 3, std::vector<std::uint8_t>(6, 1)}, model, options, a) ==
          diffusion::sample(model, diffusion::make_step_budget(6, 6), 0.9, b));
  }

  TEST_CASE("nine masked latents of 36 start from t0 = 9") {
    const diffusion::UniformDenoiser uniform(8, 6, 6);
    Rng rng(12);
    TokenGrid z(6, 6, 8, std::vector<Token>(36, 3));
    RegionMask region{6, 6, std::vector<std::uint8_t>(36, 0)};
    for (std::size_t i = 0; i < 9; ++i) region.values[i * 4] = 1;
    diffusion::SampleStats stats;
    inpaint(z, region, uniform, {}, rng, &stats);
    CHECK(region.count() == 9);
    CHECK(stats.steps == 9);
  }

  TEST_CASE("positions outside the region are preserved on 100 random masks") {
    const denoisers::Transformer model(window_model(5, 3, 3), 13);
    Rng rng(13);
    for (int n = 0; n < 100; ++n) {
      const bool large = n % 2 == 1;
      const std::size_t h = large ? 5 : 3, w = large ? 4 : 3;
      TokenGrid z(h, w, 5);
      for (auto& v : z.values) v = static_cast<Token>(rng.uniform_int(0, 4));
      RegionMask region{h, w, std::vector<std::uint8_t>(h * w)};
      for (auto& v : region.values) v = rng.bernoulli(0.4);
      InpaintOptions options;
      options.temperature = 0.9;
      const auto out = inpaint(z, region, model, options, rng);
      CHECK(out.fully_unmasked());
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (!region.values[i]) CHECK(out.values[i] == z.values[i]);
      }
    }
  }

  TEST_CASE("a single masked position is drawn from its exact conditional") {
    const auto dist = testing::markov_chain(2, 2, 3, 0.7);
    const denoisers::TabularDenoiser oracle(dist);
    const TokenGrid z(2, 2, 3, {1, 1, 2, 2});
    RegionMask region{2, 2, {0, 1, 0, 0}};
    std::vector<Token> query = z.values;
    query[1] = 3;
    std::vector<TokenGrid> data;
    for (const auto& item : dist.items) data.emplace_back(2, 2, 3, item);
    // recount weighted by the distribution: replicate each item in proportion
    std::vector<double> expect(3, 0.0);
    double total = 0.0;
    for (std::size_t n = 0; n < dist.items.size(); ++n) {
      const auto& it = dist.items[n];
      if (it[0] == 1 && it[2] == 2 && it[3] == 2) {
        expect[static_cast<std::size_t>(it[1])] += dist.weights[n];
        total += dist.weights[n];
      }
    }
    Rng rng(14);
    std::vector<double> counts(3, 0.0);
    const int trials = 20000;
    for (int i = 0; i < trials; ++i) counts[static_cast<std::size_t>(inpaint(z, region, oracle, {}, rng).values[1])] += 1;
    for (std::size_t j = 0; j < 3; ++j) {
      const double p = expect[j] / total;
      CHECK(std::abs(counts[j] / trials - p) < 4 * std::sqrt(p * (1 - p) / trials) + 1e-12);
    }
  }

  TEST_CASE("mismatched region and stray MASK outside it are usage errors") {
    const diffusion::UniformDenoiser uniform(4, 2, 2);
    Rng rng(15);
    const TokenGrid z(2, 2, 4, {0, 1, 2, 3});
    CHECK_THROWS_AS(inpaint(z, RegionMask{1, 4, std::vector<std::uint8_t>(4, 1)}, uniform, {}, rng), UsageError);
    const TokenGrid stray(2, 2, 4, {0, 4, 2, 3});
    CHECK_THROWS_AS(inpaint(stray, RegionMask{2, 2, {1, 0, 0, 0}}, uniform, {}, rng), UsageError);
  }
}
