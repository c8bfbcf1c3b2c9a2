#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "mrsur/special_fn.hpp"
#include "oracles.hpp"

using mrsur::bvn_cdf;
using mrsur::normal_cdf;

TEST_CASE("normal cdf pointwise values", "[special_fn]") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(std::fabs(normal_cdf(40.0) - 1.0) <= 1e-16);
  CHECK(normal_cdf(-40.0) == 0.0);
  CHECK(normal_cdf(1.0) == Catch::Approx(0.8413447460685429).margin(1e-15));
  CHECK(normal_cdf(1.0) ==
        Catch::Approx(oracles::normal_cdf_series(1.0)).margin(1e-15));
  CHECK(normal_cdf(0.7) ==
        Catch::Approx(oracles::normal_cdf_series(0.7)).margin(1e-15));
}

TEST_CASE("normal cdf symmetry and monotonicity", "[special_fn]") {
  double prev = -1.0;
  for (double x = -8.0; x <= 8.0; x += 0.0625) {
    CHECK(std::fabs(normal_cdf(-x) - (1.0 - normal_cdf(x))) <= 1e-15);
    const double p = normal_cdf(x);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("bivariate cdf special values", "[special_fn]") {
  CHECK(bvn_cdf(0.0, 0.0, 0.0) == 0.25);
  CHECK(bvn_cdf(mrsur::BvnQuery{0.0, 0.0, 0.5}) == bvn_cdf(0.0, 0.0, 0.5));
  CHECK(bvn_cdf(0.7, 0.7, 1.0) == normal_cdf(0.7));
  CHECK(bvn_cdf(-0.3, 0.7, 1.0) == normal_cdf(-0.3));
  CHECK(bvn_cdf(1.0, -0.5, -1.0) ==
        Catch::Approx(normal_cdf(1.0) + normal_cdf(-0.5) - 1.0).margin(1e-15));
  CHECK(bvn_cdf(-1.0, -1.0, -1.0) == 0.0);
  CHECK(bvn_cdf(0.0, 0.0, 0.5) == Catch::Approx(1.0 / 3.0).margin(1e-13));
  // Closed form at a = b = 0: 1/4 + asin(rho) / (2 pi).
  for (double rho : {-0.9, -0.3, 0.2, 0.7, 0.99}) {
    CHECK(bvn_cdf(0.0, 0.0, rho) ==
          Catch::Approx(0.25 + std::asin(rho) / (2.0 * M_PI)).margin(1e-14));
  }
  // High-precision reference values (30-digit conditional quadrature).
  CHECK(bvn_cdf(1.0, -1.0, 0.9) == Catch::Approx(0.15865510863301851).margin(1e-14));
  CHECK(bvn_cdf(-2.0, 4.0, -0.999) ==
        Catch::Approx(0.0227184606014487451).margin(1e-14));
  CHECK(bvn_cdf(0.7, 0.7, 0.925) == Catch::Approx(0.709635826788198613).margin(1e-14));
  CHECK(bvn_cdf(2.0, 2.0, 0.5) == Catch::Approx(0.958552682338804565).margin(1e-14));
}

TEST_CASE("bivariate cdf against the quadrature oracle", "[special_fn]") {
  for (double a : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
    for (double b : {-3.0, 0.0, 0.5, 2.0}) {
      for (double rho : {-0.999, -0.95, -0.5, 0.0, 0.3, 0.9, 0.97, 0.999}) {
        const double got = bvn_cdf(a, b, rho);
        const double want = oracles::bvn_quadrature(a, b, rho);
        INFO("a=" << a << " b=" << b << " rho=" << rho);
        CHECK(std::fabs(got - want) <= 1e-12);
      }
    }
  }
}

TEST_CASE("bivariate cdf symmetry, independence and marginals", "[special_fn]") {
  for (double a = -5.0; a <= 5.0; a += 1.25) {
    for (double b = -5.0; b <= 5.0; b += 1.25) {
      CHECK(std::fabs(bvn_cdf(a, b, 0.0) - normal_cdf(a) * normal_cdf(b)) <= 1e-13);
      for (double rho : {-0.8, 0.4, 0.95}) {
        CHECK(bvn_cdf(a, b, rho) == Catch::Approx(bvn_cdf(b, a, rho)).margin(1e-14));
      }
    }
    for (double rho : {-0.9, 0.0, 0.6, 0.999}) {
      CHECK(std::fabs(bvn_cdf(a, 40.0, rho) - normal_cdf(a)) <= 1e-12);
    }
  }
}

TEST_CASE("bivariate cdf monotone in each argument and in rho", "[special_fn]") {
  const std::vector<double> grid = {-3.0, -1.5, -0.5, 0.0, 0.5, 1.5, 3.0};
  const std::vector<double> rhos = {-0.99, -0.7, -0.3, 0.0, 0.3, 0.7, 0.99};
  for (double rho : rhos) {
    for (double b : grid) {
      double prev = -1.0;
      for (double a : grid) {
        const double v = bvn_cdf(a, b, rho);
        CHECK(v >= prev - 1e-15);
        prev = v;
      }
    }
  }
  for (double a : grid) {
    for (double b : grid) {
      double prev = -1.0;
      for (double rho : rhos) {
        const double v = bvn_cdf(a, b, rho);
        CHECK(v >= prev - 1e-15);
        prev = v;
      }
    }
  }
}

// E[Phi_d(W; m', K')] = Phi_d(m; m', K + K') for W ~ N(m, K), d = 1, 2.
TEST_CASE("gaussian smoothing identity by monte carlo", "[special_fn]") {
  std::mt19937_64 rng(321);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int N = 1000000;

  SECTION("univariate") {
    for (int rep = 0; rep < 5; ++rep) {
      const double m = 2.0 * unif(rng), mp = 2.0 * unif(rng);
      const double K = 0.2 + std::fabs(unif(rng)), Kp = 0.2 + std::fabs(unif(rng));
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < N; ++i) {
        const double w = m + std::sqrt(K) * gauss(rng);
        const double v = normal_cdf((w - mp) / std::sqrt(Kp));
        sum += v;
        sumsq += v * v;
      }
      const double mean = sum / N;
      const double se = std::sqrt((sumsq / N - mean * mean) / N);
      const double expected = normal_cdf((m - mp) / std::sqrt(K + Kp));
      CHECK(std::fabs(mean - expected) <= 3.0 * se + 1e-9);
    }
  }

  SECTION("bivariate") {
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::Vector2d m(unif(rng), unif(rng)), mp(unif(rng), unif(rng));
      Eigen::Matrix2d A, B;
      A << 1.0 + unif(rng), unif(rng), unif(rng), 1.0 + unif(rng);
      B << 1.0 + unif(rng), unif(rng), unif(rng), 1.0 + unif(rng);
      const Eigen::Matrix2d K = A * A.transpose() + 0.05 * Eigen::Matrix2d::Identity();
      const Eigen::Matrix2d Kp = B * B.transpose() + 0.05 * Eigen::Matrix2d::Identity();
      const Eigen::Matrix2d Lk = K.llt().matrixL();
      auto phi2 = [](const Eigen::Vector2d& w, const Eigen::Vector2d& mu,
                     const Eigen::Matrix2d& S) {
        const double s1 = std::sqrt(S(0, 0)), s2 = std::sqrt(S(1, 1));
        return bvn_cdf((w[0] - mu[0]) / s1, (w[1] - mu[1]) / s2,
                       S(0, 1) / (s1 * s2));
      };
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < N; ++i) {
        const Eigen::Vector2d w = m + Lk * Eigen::Vector2d(gauss(rng), gauss(rng));
        const double v = phi2(w, mp, Kp);
        sum += v;
        sumsq += v * v;
      }
      const double mean = sum / N;
      const double se = std::sqrt((sumsq / N - mean * mean) / N);
      const double expected = phi2(m, mp, Eigen::Matrix2d(K + Kp));
      CHECK(std::fabs(mean - expected) <= 3.0 * se + 1e-9);
    }
  }
}
