#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vqad/diffusion/denoiser.hpp"
#include "vqad/diffusion/rng.hpp"
#include "vqad/diffusion/sampling.hpp"
#include "vqad/diffusion/token_grid.hpp"

namespace vqad::canvas {

using diffusion::Token;
using diffusion::TokenGrid;

/// A token grid at least as large as the denoiser's window, read through
/// window-sized crops whose origins step by `stride` along both axes.
struct Canvas {
  TokenGrid grid;
  std::size_t window_height = 0;
  std::size_t window_width = 0;
  std::size_t stride = 1;
  /// When nonzero, each evaluation uses this many strided windows drawn
  /// uniformly without replacement, plus any needed to cover every position.
  std::size_t window_subset = 0;

  void validate() const;
};

struct Window {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Window&, const Window&) = default;
};

/// Every strided window origin in raster order. Throws UsageError when the
/// stride leaves a position uncovered.
std::vector<Window> window_origins(const Canvas& canvas);

/// Number of windows in `windows` covering each canvas position.
std::vector<std::size_t> coverage_counts(const Canvas& canvas, std::span<const Window> windows);

/// Windows a single evaluation reads: all of them, or a random covering subset.
std::vector<Window> select_windows(const Canvas& canvas, diffusion::Rng* rng);

/// Per-position K-way probabilities [a * b * K]: the mean over covering
/// windows of softmax(window logits / temperature).
std::vector<double> aggregate_denoise(const Canvas& canvas, const diffusion::Denoiser& denoiser,
                                      double temperature = 1.0, diffusion::Rng* rng = nullptr);

struct LargeCanvasOptions {
  std::size_t stride = 1;
  std::size_t window_subset = 0;
  double temperature = 0.8;
};

/// Unconditional a x b sample with T = a * b, every reverse step driven by
/// aggregate_denoise.
TokenGrid sample_large(std::size_t height, std::size_t width, const diffusion::Denoiser& denoiser,
                       std::span<const std::size_t> budget, const LargeCanvasOptions& options,
                       diffusion::Rng& rng, diffusion::SampleStats* stats = nullptr);

/// Positions to regenerate, nonzero = regenerate.
struct RegionMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  std::size_t count() const;
};

struct InpaintOptions {
  double temperature = 1.0;
  std::size_t steps = 0;  // 0: one step per masked position
  std::size_t stride = 1;
  std::size_t window_subset = 0;
};

/// Masks the region, sets t0 to the number of masked positions on the whole
/// grid and runs the reverse process from t0. Positions outside the region
/// are never touched; an empty region returns the input.
TokenGrid inpaint(const TokenGrid& z0, const RegionMask& region, const diffusion::Denoiser& denoiser,
                  const InpaintOptions& options, diffusion::Rng& rng,
                  diffusion::SampleStats* stats = nullptr);

}  // namespace vqad::canvas
