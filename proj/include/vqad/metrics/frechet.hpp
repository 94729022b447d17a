#pragma once

#include <Eigen/Dense>

#include "vqad/metrics/features.hpp"

namespace vqad::metrics {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Sample mean and unbiased covariance, symmetrized. UsageError for n < 2.
GaussianFit fit_gaussian(const PointCloud& cloud);

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), the root taken through
/// the symmetric form S1^(1/2) S2 S1^(1/2) with negative eigenvalues clamped.
/// UsageError when a covariance is asymmetric beyond 1e-6.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

}  // namespace vqad::metrics
