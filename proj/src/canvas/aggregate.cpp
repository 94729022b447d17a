#include <algorithm>
#include <numeric>
#include <string>

#include "vqad/canvas/canvas.hpp"
#include "vqad/diffusion/schedule.hpp"
#include "vqad/error.hpp"

namespace vqad::canvas {

namespace {

std::vector<std::size_t> origins_1d(std::size_t extent, std::size_t window, std::size_t stride,
                                    const char* axis) {
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + window <= extent; o += stride) out.push_back(o);
  if (out.back() + window < extent) {
    throw UsageError(std::string("canvas: stride ") + std::to_string(stride) + " leaves " + axis + " positions " +
                     std::to_string(out.back() + window) + ".." + std::to_string(extent - 1) + " uncovered");
  }
  return out;
}

std::vector<Token> crop(const TokenGrid& grid, const Window& w, std::size_t h, std::size_t wd) {
  std::vector<Token> out(h * wd);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < wd; ++c) out[r * wd + c] = grid.at(w.row + r, w.col + c);
  }
  return out;
}

}  // namespace

void Canvas::validate() const {
  grid.validate();
  if (window_height == 0 || window_width == 0) throw UsageError("canvas: empty window");
  if (grid.height < window_height || grid.width < window_width) {
    throw UsageError("canvas: " + std::to_string(grid.height) + "x" + std::to_string(grid.width) +
                     " is smaller than the " + std::to_string(window_height) + "x" +
                     std::to_string(window_width) + " window");
  }
  if (stride == 0 || stride > std::min(window_height, window_width)) {
    throw UsageError("canvas: stride " + std::to_string(stride) + " outside [1, window size]");
  }
}

std::vector<Window> window_origins(const Canvas& canvas) {
  canvas.validate();
  const auto rows = origins_1d(canvas.grid.height, canvas.window_height, canvas.stride, "row");
  const auto cols = origins_1d(canvas.grid.width, canvas.window_width, canvas.stride, "column");
  std::vector<Window> out;
  for (auto r : rows) {
    for (auto c : cols) out.push_back({r, c});
  }
  return out;
}

std::vector<std::size_t> coverage_counts(const Canvas& canvas, std::span<const Window> windows) {
  std::vector<std::size_t> z(canvas.grid.size(), 0);
  for (const auto& w : windows) {
    for (std::size_t r = 0; r < canvas.window_height; ++r) {
      for (std::size_t c = 0; c < canvas.window_width; ++c) ++z[(w.row + r) * canvas.grid.width + w.col + c];
    }
  }
  return z;
}

std::vector<Window> select_windows(const Canvas& canvas, diffusion::Rng* rng) {
  std::vector<Window> all = window_origins(canvas);
  if (canvas.window_subset == 0 || canvas.window_subset >= all.size()) return all;
  if (!rng) throw UsageError("canvas: a random window subset needs a random stream");

  // partial Fisher-Yates: the first k entries are a uniform k-subset
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < canvas.window_subset; ++i) {
    std::swap(order[i], order[rng->uniform_int(i, order.size() - 1)]);
  }
  std::vector<bool> chosen(all.size(), false);
  for (std::size_t i = 0; i < canvas.window_subset; ++i) chosen[order[i]] = true;

  std::vector<Window> picked;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (chosen[i]) picked.push_back(all[i]);
  }
  // top up in raster order until every position is covered
  auto z = coverage_counts(canvas, picked);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (chosen[i]) continue;
    const Window& w = all[i];
    bool needed = false;
    for (std::size_t r = 0; r < canvas.window_height && !needed; ++r) {
      for (std::size_t c = 0; c < canvas.window_width && !needed; ++c) {
        needed = z[(w.row + r) * canvas.grid.width + w.col + c] == 0;
      }
    }
    if (!needed) continue;
    chosen[i] = true;
    for (std::size_t r = 0; r < canvas.window_height; ++r) {
      for (std::size_t c = 0; c < canvas.window_width; ++c) ++z[(w.row + r) * canvas.grid.width + w.col + c];
    }
  }
  picked.clear();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (chosen[i]) picked.push_back(all[i]);
  }
  return picked;
}

std::vector<double> aggregate_denoise(const Canvas& canvas, const diffusion::Denoiser& denoiser,
                                      double temperature, diffusion::Rng* rng) {
  if (denoiser.height() != canvas.window_height || denoiser.width() != canvas.window_width) {
    throw UsageError("aggregate: denoiser window does not match the canvas window");
  }
  if (denoiser.codes() != canvas.grid.codes) throw UsageError("aggregate: codebook size mismatch");
  const std::vector<Window> windows = select_windows(canvas, rng);
  const std::size_t K = canvas.grid.codes;
  const std::size_t h = canvas.window_height, w = canvas.window_width;

  std::vector<std::vector<double>> logits;
  if (windows.size() == 1) {
    // plain call so a window-sized canvas reproduces the unwindowed path exactly
    logits.push_back(denoiser.logits(crop(canvas.grid, windows[0], h, w)));
  } else {
    std::vector<std::vector<Token>> crops;
    crops.reserve(windows.size());
    for (const auto& win : windows) crops.push_back(crop(canvas.grid, win, h, w));
    logits = denoiser.logits_batch(crops);
  }

  // fixed window order keeps the reduction deterministic
  std::vector<double> sum(canvas.grid.size() * K, 0.0);
  for (std::size_t n = 0; n < windows.size(); ++n) {
    const std::vector<double> p = diffusion::tempered_probabilities(logits[n], K, temperature);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t pos = (windows[n].row + r) * canvas.grid.width + windows[n].col + c;
        const double* src = &p[(r * w + c) * K];
        for (std::size_t j = 0; j < K; ++j) sum[pos * K + j] += src[j];
      }
    }
  }
  const auto z = coverage_counts(canvas, windows);
  for (std::size_t pos = 0; pos < z.size(); ++pos) {
    for (std::size_t j = 0; j < K; ++j) sum[pos * K + j] /= static_cast<double>(z[pos]);
  }
  return sum;
}

TokenGrid sample_large(std::size_t height, std::size_t width, const diffusion::Denoiser& denoiser,
                       std::span<const std::size_t> budget, const LargeCanvasOptions& options,
                       diffusion::Rng& rng, diffusion::SampleStats* stats) {
  Canvas canvas{TokenGrid(height, width, denoiser.codes()), denoiser.height(), denoiser.width(), options.stride,
                options.window_subset};
  window_origins(canvas);  // reject bad strides before any work
  if (budget.empty() || budget.front() != height * width) {
    throw UsageError("sample_large: step budget must start at T = " + std::to_string(height * width));
  }
  return diffusion::reverse_process(
      canvas.grid, budget,
      [&](const TokenGrid& z) {
        canvas.grid = z;
        return aggregate_denoise(canvas, denoiser, options.temperature, &rng);
      },
      rng, stats);
}

}  // namespace vqad::canvas
