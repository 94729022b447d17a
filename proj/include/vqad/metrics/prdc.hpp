#pragma once

#include <cstddef>
#include <vector>

#include "vqad/metrics/features.hpp"

namespace vqad::metrics {

/// Squared Euclidean distance accumulated in double, in index order.
double squared_distance(std::span<const float> a, std::span<const float> b);

/// Distance from each point to its k-th nearest other point (duplicates
/// count). UsageError unless n > k >= 1.
std::vector<double> knn_radius(const PointCloud& cloud, std::size_t k);
/// Same, squared; the membership tests compare squared distances.
std::vector<double> knn_radius_squared(const PointCloud& cloud, std::size_t k);

/// Boundary points count as inside the hyper-spheres. Density is not clamped.
struct Prdc {
  double precision = 0.0;
  double recall = 0.0;
  double density = 0.0;
  double coverage = 0.0;
};

Prdc prdc(const PointCloud& real, const PointCloud& fake, std::size_t k);

}  // namespace vqad::metrics
