#include "vqad/metrics/frechet.hpp"

#include <cmath>
#include <string>

#include "vqad/error.hpp"

namespace vqad::metrics {

namespace {

void check_fit(const GaussianFit& f, const char* which) {
  const auto d = f.mean.size();
  if (f.covariance.rows() != d || f.covariance.cols() != d) throw UsageError(std::string("frechet: ") + which + " covariance has the wrong size");
  const double scale = std::max(1.0, f.covariance.cwiseAbs().maxCoeff());
  if ((f.covariance - f.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-6 * scale) {
    throw UsageError(std::string("frechet: ") + which + " covariance is not symmetric");
  }
  if (!f.mean.allFinite() || !f.covariance.allFinite()) throw NumericFault(std::string("frechet: ") + which + " fit is not finite");
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

GaussianFit fit_gaussian(const PointCloud& cloud) {
  if (cloud.n < 2) throw UsageError("fit_gaussian: need at least 2 points, got " + std::to_string(cloud.n));
  cloud.validate();
  const auto d = static_cast<Eigen::Index>(cloud.d);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cloud.n), d);
  for (std::size_t i = 0; i < cloud.n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = cloud.values[i * cloud.d + j];
  }
  GaussianFit f;
  f.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - f.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(cloud.n - 1);
  f.covariance = 0.5 * (cov + cov.transpose());
  return f;
}

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  check_fit(a, "first");
  check_fit(b, "second");
  if (a.mean.size() != b.mean.size()) throw UsageError("frechet: fits have different dimensions");
  const Eigen::MatrixXd ra = psd_sqrt(a.covariance);
  const Eigen::MatrixXd inner = ra * b.covariance * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_root;
  return std::max(d, 0.0);
}

}  // namespace vqad::metrics
