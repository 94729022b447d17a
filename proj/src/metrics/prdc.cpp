#include "vqad/metrics/prdc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vqad/error.hpp"

namespace vqad::metrics {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

std::vector<double> knn_radius_squared(const PointCloud& cloud, std::size_t k) {
  if (k == 0 || cloud.n <= k) {
    throw UsageError("knn: need n > k >= 1, got n = " + std::to_string(cloud.n) + ", k = " + std::to_string(k));
  }
  cloud.validate();
  std::vector<double> out(cloud.n), dist(cloud.n - 1);
  for (std::size_t i = 0; i < cloud.n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < cloud.n; ++j) {
      if (j != i) dist[m++] = squared_distance(cloud.row(i), cloud.row(j));
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    out[i] = dist[k - 1];
  }
  return out;
}

std::vector<double> knn_radius(const PointCloud& cloud, std::size_t k) {
  auto r = knn_radius_squared(cloud, k);
  for (auto& v : r) v = std::sqrt(v);
  return r;
}

Prdc prdc(const PointCloud& real, const PointCloud& fake, std::size_t k) {
  if (real.d != fake.d) {
    throw UsageError("prdc: real points have dimension " + std::to_string(real.d) + ", fake " + std::to_string(fake.d));
  }
  const auto real_r = knn_radius_squared(real, k);
  const auto fake_r = knn_radius_squared(fake, k);
  std::size_t precise = 0, recalled = 0, covered = 0, memberships = 0;
  std::vector<bool> real_covered(real.n, false);
  for (std::size_t j = 0; j < fake.n; ++j) {
    std::size_t inside = 0;
    for (std::size_t i = 0; i < real.n; ++i) {
      if (squared_distance(fake.row(j), real.row(i)) <= real_r[i]) {
        ++inside;
        real_covered[i] = true;
      }
    }
    memberships += inside;
    precise += inside > 0;
  }
  for (std::size_t i = 0; i < real.n; ++i) {
    covered += real_covered[i];
    for (std::size_t j = 0; j < fake.n; ++j) {
      if (squared_distance(real.row(i), fake.row(j)) <= fake_r[j]) {
        ++recalled;
        break;
      }
    }
  }
  Prdc out;
  out.precision = static_cast<double>(precise) / static_cast<double>(fake.n);
  out.recall = static_cast<double>(recalled) / static_cast<double>(real.n);
  out.density = static_cast<double>(memberships) / (static_cast<double>(k) * static_cast<double>(fake.n));
  out.coverage = static_cast<double>(covered) / static_cast<double>(real.n);
  return out;
}

}  // namespace vqad::metrics
