#include "vqad/metrics/features.hpp"

#include <cmath>
#include <string>

#include "vqad/error.hpp"

namespace vqad::metrics {

PointCloud::PointCloud(std::size_t n_, std::size_t d_, std::vector<float> v) : n(n_), d(d_), values(std::move(v)) {
  if (values.size() != n * d) throw UsageError("point cloud: " + std::to_string(values.size()) + " values for " +
                                               std::to_string(n) + " x " + std::to_string(d));
}

void PointCloud::validate() const {
  if (values.size() != n * d) throw UsageError("point cloud: size mismatch");
  for (float v : values) {
    if (!std::isfinite(v)) throw NumericFault("point cloud: non-finite coordinate");
  }
}

FeatureSet pooled_features(std::span<const vq::Image> images, std::size_t pool) {
  if (pool == 0) throw UsageError("features: pool must be >= 1");
  if (images.empty()) return FeatureSet(0, 0);
  const std::size_t H = images[0].height, W = images[0].width, C = images[0].channels;
  if (H % pool || W % pool) {
    throw UsageError("features: " + std::to_string(H) + "x" + std::to_string(W) + " images do not divide into " +
                     std::to_string(pool) + "x" + std::to_string(pool) + " cells");
  }
  const std::size_t ch = H / pool, cw = W / pool;
  FeatureSet out(images.size(), pool * pool * C);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& im = images[n];
    if (im.height != H || im.width != W || im.channels != C) throw UsageError("features: images differ in extents");
    for (std::size_t pr = 0; pr < pool; ++pr) {
      for (std::size_t pc = 0; pc < pool; ++pc) {
        for (std::size_t c = 0; c < C; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < ch; ++r) {
            for (std::size_t q = 0; q < cw; ++q) s += im.at(pr * ch + r, pc * cw + q, c);
          }
          out.values[n * out.d + (pr * pool + pc) * C + c] = static_cast<float>(s / static_cast<double>(ch * cw));
        }
      }
    }
  }
  return out;
}

}  // namespace vqad::metrics
