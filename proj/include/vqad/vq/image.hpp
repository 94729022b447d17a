#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqad/autodiff/tensor.hpp"

namespace vqad::vq {

/// Interleaved H x W x C pixels, nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
      : height(height), width(width), channels(channels), pixels(height * width * channels, fill) {}

  float& at(std::size_t r, std::size_t c, std::size_t ch) { return pixels[(r * width + c) * channels + ch]; }
  float at(std::size_t r, std::size_t c, std::size_t ch) const { return pixels[(r * width + c) * channels + ch]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Stacks images of equal extents into [B, C, H, W].
ad::Tensor to_nchw(std::span<const Image> images);
/// Image b of an [B, C, H, W] tensor.
Image from_nchw(const ad::Tensor& batch, std::size_t b);

/// Mean squared pixel error.
double mse(const Image& a, const Image& b);

/// Per-pixel mean image of a dataset.
Image mean_image(std::span<const Image> images);
/// Reconstruction error of always predicting the per-pixel dataset mean, i.e.
/// the average per-pixel variance.
double mean_baseline_mse(std::span<const Image> images);

}  // namespace vqad::vq
