#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vqad/vq/image.hpp"

namespace vqad::metrics {

/// n points of dimension d, row-major.
struct PointCloud {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> values;

  PointCloud() = default;
  PointCloud(std::size_t n, std::size_t d) : n(n), d(d), values(n * d, 0.0f) {}
  PointCloud(std::size_t n, std::size_t d, std::vector<float> values);

  std::span<const float> row(std::size_t i) const { return {values.data() + i * d, d}; }
  void validate() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

using FeatureSet = PointCloud;

/// Each image averaged over a pool x pool grid of equal cells, flattened to
/// pool * pool * C features. Extents must be divisible by pool.
FeatureSet pooled_features(std::span<const vq::Image> images, std::size_t pool = 8);

}  // namespace vqad::metrics
