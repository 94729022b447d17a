#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "oracles.hpp"
#include "vqad/error.hpp"
#include "vqad/metrics/features.hpp"
#include "vqad/metrics/frechet.hpp"
#include "vqad/metrics/prdc.hpp"

using namespace vqad;
using namespace vqad::metrics;

namespace {

PointCloud line_cloud(std::initializer_list<float> xs) { return PointCloud(xs.size(), 1, std::vector<float>(xs)); }

PointCloud gaussian_cloud(std::mt19937_64& rng, std::size_t n, std::size_t d, double shift = 0.0, double scale = 1.0) {
  std::normal_distribution<double> z;
  PointCloud out(n, d);
  for (auto& v : out.values) v = static_cast<float>(shift + scale * z(rng));
  return out;
}

GaussianFit fit_of(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return {std::move(mean), std::move(cov)}; }

// Matrix square root by the Denman-Beavers iteration; needs no eigensolver.
Eigen::MatrixXd db_sqrt(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd y = a, z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int it = 0; it < 100; ++it) {
    const Eigen::MatrixXd yi = y.inverse(), zi = z.inverse();
    y = 0.5 * (y + zi);
    z = 0.5 * (z + yi);
  }
  return y;
}

double oracle_frechet(const GaussianFit& a, const GaussianFit& b) {
  const Eigen::MatrixXd root = db_sqrt(a.covariance * b.covariance);
  return (a.mean - b.mean).squaredNorm() + (a.covariance + b.covariance - 2.0 * root).trace();
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = z(rng);
  }
  return m * m.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_SUITE("knn radius") {
  TEST_CASE("points 0, 1, 3 with k = 1") {
    const auto r = knn_radius(line_cloud({0, 1, 3}), 1);
    CHECK(r == std::vector<double>{1, 1, 2});
  }

  TEST_CASE("duplicates count as neighbours at distance zero") {
    const auto r = knn_radius(line_cloud({2, 2, 5}), 1);
    CHECK(r == std::vector<double>{0, 0, 3});
  }

  TEST_CASE("matches a full-sort oracle on random clouds") {
    std::mt19937_64 rng(1);
    for (std::size_t k : {1, 3, 5}) {
      const auto c = gaussian_cloud(rng, 60, 4);
      CHECK(knn_radius_squared(c, k) == testing::oracle_radii_sq(c, k));
    }
  }

  TEST_CASE("n <= k and k = 0 are usage errors") {
    CHECK_THROWS_AS(knn_radius(line_cloud({0, 1}), 2), UsageError);
    CHECK_THROWS_AS(knn_radius(line_cloud({0, 1}), 0), UsageError);
  }
}

TEST_SUITE("prdc") {
  TEST_CASE("five planted points and five outliers") {
    // reals at 0..9, radius 1 each; fakes duplicate 0..4 and sit far away at 100..104
    PointCloud real(10, 1), fake(10, 1);
    for (int i = 0; i < 10; ++i) real.values[i] = static_cast<float>(i);
    for (int i = 0; i < 5; ++i) {
      fake.values[i] = static_cast<float>(i);
      fake.values[5 + i] = static_cast<float>(100 + i);
    }
    const Prdc p = prdc(real, fake, 1);
    CHECK(p.precision == 0.5);
    CHECK(p.density == doctest::Approx(1.4));  // 2 + 3 + 3 + 3 + 3 balls over k M = 10
    CHECK(p.recall == doctest::Approx(0.6));   // reals 0..5 fall inside a fake ball
    CHECK(p.coverage == doctest::Approx(0.6));
  }

  TEST_CASE("identical clouds have full precision, recall and coverage") {
    std::mt19937_64 rng(2);
    const auto c = gaussian_cloud(rng, 80, 3);
    const Prdc p = prdc(c, c, 5);
    CHECK(p.precision == 1.0);
    CHECK(p.recall == 1.0);
    CHECK(p.coverage == 1.0);
  }

  TEST_CASE("a far displaced cloud scores zero") {
    std::mt19937_64 rng(3);
    const auto real = gaussian_cloud(rng, 50, 3);
    const auto fake = gaussian_cloud(rng, 50, 3, 100.0);
    const Prdc p = prdc(real, fake, 3);
    CHECK(p.precision == 0.0);
    CHECK(p.recall == 0.0);
    CHECK(p.density == 0.0);
    CHECK(p.coverage == 0.0);
  }

  TEST_CASE("boundary points count as inside") {
    // real radius is exactly 1 and the fake sits on the sphere
    const Prdc p = prdc(line_cloud({0, 1}), line_cloud({2, 10}), 1);
    CHECK(p.precision == 0.5);
  }

  TEST_CASE("matches the brute-force oracle for random clouds up to 200 points") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> size(6, 200);
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = size(rng), m = size(rng), d = 1 + trial % 5, k = 1 + trial % 5;
      const auto real = gaussian_cloud(rng, n, d);
      const auto fake = gaussian_cloud(rng, m, d, 0.3 * (trial % 3), 1.0 + 0.2 * (trial % 4));
      const Prdc got = prdc(real, fake, k), want = testing::oracle_prdc(real, fake, k);
      CHECK(got.precision == want.precision);
      CHECK(got.recall == want.recall);
      CHECK(got.density == doctest::Approx(want.density).epsilon(1e-12));
      CHECK(got.coverage == want.coverage);
    }
  }

  TEST_CASE("invariant under a rotation and translation of both clouds") {
    std::mt19937_64 rng(5);
    const auto real = gaussian_cloud(rng, 100, 2);
    const auto fake = gaussian_cloud(rng, 90, 2, 0.5);
    auto move = [](PointCloud c) {
      const double a = 0.7, ca = std::cos(a), sa = std::sin(a);
      for (std::size_t i = 0; i < c.n; ++i) {
        const double x = c.values[2 * i], y = c.values[2 * i + 1];
        c.values[2 * i] = static_cast<float>(ca * x - sa * y + 3.0);
        c.values[2 * i + 1] = static_cast<float>(sa * x + ca * y - 2.0);
      }
      return c;
    };
    const Prdc a = prdc(real, fake, 5), b = prdc(move(real), move(fake), 5);
    CHECK(a.precision == doctest::Approx(b.precision));
    CHECK(a.recall == doctest::Approx(b.recall));
    CHECK(a.density == doctest::Approx(b.density));
    CHECK(a.coverage == doctest::Approx(b.coverage));
  }

  TEST_CASE("dimension mismatch and tiny clouds are usage errors") {
    CHECK_THROWS_AS(prdc(PointCloud(5, 2), PointCloud(5, 3), 1), UsageError);
    CHECK_THROWS_AS(prdc(PointCloud(5, 2), PointCloud(2, 2), 2), UsageError);
  }
}

TEST_SUITE("fit_gaussian") {
  TEST_CASE("points -1 and 1") {
    const auto f = fit_gaussian(line_cloud({-1, 1}));
    CHECK(f.mean(0) == 0.0);
    CHECK(f.covariance(0, 0) == doctest::Approx(2.0));
  }

  TEST_CASE("sample moments land inside their sampling error") {
    std::mt19937_64 rng(6);
    const std::size_t n = 20000;
    const auto c = gaussian_cloud(rng, n, 3, 1.0, 2.0);
    const auto f = fit_gaussian(c);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(f.mean(i) - 1.0) < 4 * 2.0 / std::sqrt(double(n)));
      // variance of a sample variance is 2 sigma^4 / n
      CHECK(std::abs(f.covariance(i, i) - 4.0) < 4 * std::sqrt(2.0 * 16.0 / n));
    }
    CHECK(f.covariance == f.covariance.transpose());
  }

  TEST_CASE("fewer than two points is a usage error") {
    CHECK_THROWS_AS(fit_gaussian(line_cloud({1})), UsageError);
  }
}

TEST_SUITE("frechet") {
  TEST_CASE("unit variances one apart in one dimension") {
    Eigen::VectorXd m0(1), m1(1);
    m0 << 0;
    m1 << 1;
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    CHECK(frechet_distance(fit_of(m0, one), fit_of(m1, one)) == doctest::Approx(1.0));
  }

  TEST_CASE("diag(1, 4) against diag(4, 1) sums per-axis terms") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd a = Eigen::Vector2d(1, 4).asDiagonal(), b = Eigen::Vector2d(4, 1).asDiagonal();
    // each axis contributes (sqrt(s1) - sqrt(s2))^2 = 1
    CHECK(frechet_distance(fit_of(zero, a), fit_of(zero, b)) == doctest::Approx(2.0));
  }

  TEST_CASE("a fit against itself is zero") {
    std::mt19937_64 rng(7);
    const auto f = fit_of(Eigen::VectorXd::Random(4), random_spd(rng, 4));
    CHECK(std::abs(frechet_distance(f, f)) < 1e-9);
  }

  TEST_CASE("symmetric and equal to the Denman-Beavers oracle") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 1 + trial % 6;
      const auto a = fit_of(Eigen::VectorXd::Random(d), random_spd(rng, d));
      const auto b = fit_of(Eigen::VectorXd::Random(d), random_spd(rng, d));
      const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
      CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
      CHECK(ab == doctest::Approx(oracle_frechet(a, b)).epsilon(1e-8));
      CHECK(ab >= -1e-9);
    }
  }

  TEST_CASE("singular covariances stay finite") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd a = Eigen::Vector2d(1, 0).asDiagonal(), b = Eigen::Vector2d(0, 1).asDiagonal();
    CHECK(frechet_distance(fit_of(zero, a), fit_of(zero, b)) == doctest::Approx(2.0));
  }

  TEST_CASE("asymmetric covariance and dimension mismatch are usage errors") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(0, 1) = 0.5;
    CHECK_THROWS_AS(frechet_distance(fit_of(zero, bad), fit_of(zero, Eigen::MatrixXd::Identity(2, 2))), UsageError);
    CHECK_THROWS_AS(frechet_distance(fit_of(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)),
                                     fit_of(zero, Eigen::MatrixXd::Identity(2, 2))),
                    UsageError);
  }
}

TEST_SUITE("pooled_features") {
  TEST_CASE("16x16 images pool to 192 cell means") {
    vq::Image im(16, 16, 3);
    for (std::size_t r = 0; r < 16; ++r) {
      for (std::size_t c = 0; c < 16; ++c) {
        for (std::size_t ch = 0; ch < 3; ++ch) im.at(r, c, ch) = static_cast<float>(r * 16 + c + 1000 * ch);
      }
    }
    const std::vector<vq::Image> one{im};
    const auto f = pooled_features(one, 8);
    REQUIRE(f.d == 192);
    // cell (pr, pc) averages rows 2pr..2pr+1, cols 2pc..2pc+1
    for (std::size_t pr = 0; pr < 8; ++pr) {
      for (std::size_t pc = 0; pc < 8; ++pc) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double want = (2 * pr + 0.5) * 16 + (2 * pc + 0.5) + 1000.0 * ch;
          CHECK(f.values[(pr * 8 + pc) * 3 + ch] == doctest::Approx(want));
        }
      }
    }
  }

  TEST_CASE("empty input gives an empty set") { CHECK(pooled_features({}, 8).n == 0); }

  TEST_CASE("indivisible extents and mixed sizes are usage errors") {
    const std::vector<vq::Image> odd{vq::Image(12, 12, 3)};
    CHECK_THROWS_AS(pooled_features(odd, 8), UsageError);
    const std::vector<vq::Image> mixed{vq::Image(8, 8, 3), vq::Image(16, 16, 3)};
    CHECK_THROWS_AS(pooled_features(mixed, 8), UsageError);
  }
}
