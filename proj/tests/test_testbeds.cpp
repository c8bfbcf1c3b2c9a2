#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mrsur/testbeds.hpp"
#include "oracles.hpp"

using namespace mrsur;

TEST_CASE("forrester pair", "[testbeds]") {
  CHECK(forrester_lf(1.0 / 3.0) == Catch::Approx(-5.0 / 3.0).margin(1e-14));
  CHECK(forrester_hf(1.0 / 3.0) == Catch::Approx(10.0).margin(1e-13));
  CHECK(forrester_lf(0.0) == Catch::Approx(-3.4863950093841435).margin(1e-12));
  CHECK(forrester_lf(0.5) == Catch::Approx(0.4546487134128408).margin(1e-12));
  CHECK(forrester_hf(0.0) == Catch::Approx(13.027209981231713).margin(1e-12));

  // f2 = 2 f1 - 20 (u - 1) everywhere.
  for (int i = 0; i <= 100; ++i) {
    const double u = i / 100.0;
    CHECK(std::fabs(forrester_hf(u) - (2.0 * forrester_lf(u) - 20.0 * (u - 1.0))) <=
          1e-12);
  }
}

TEST_CASE("exponential euler scheme", "[testbeds]") {
  OscillatorConfig cfg;
  cfg.omega0 = 2.0 * M_PI;
  cfg.zeta = 0.0;
  cfg.delta = 0.05;
  cfg.t_end = 2.0;
  cfg.spectral_intensity = 0.0;

  // Zero noise from the origin stays at the origin.
  for (const auto& s : exp_euler_trajectory(cfg, 1)) {
    CHECK(s[0] == 0.0);
    CHECK(s[1] == 0.0);
  }

  // Undamped cosine from (1, 0): exact at t = 1 for any step dividing 1.
  for (double delta : {0.5, 0.25, 0.1, 0.02}) {
    cfg.delta = delta;
    const auto traj = exp_euler_trajectory(cfg, 1, Eigen::Vector2d(1.0, 0.0));
    const int k1 = static_cast<int>(std::round(1.0 / delta));
    CHECK(traj[k1][0] == Catch::Approx(1.0).margin(1e-9));
  }

  // The homogeneous flow composes exactly across step sizes.
  OscillatorConfig a = cfg, b = cfg;
  a.omega0 = b.omega0 = 1.0;
  a.zeta = b.zeta = 0.1;
  a.t_end = b.t_end = 10.0;
  a.delta = 0.01;
  b.delta = 0.5;
  const auto fine = exp_euler_trajectory(a, 1, Eigen::Vector2d(1.0, 0.0));
  const auto coarse = exp_euler_trajectory(b, 1, Eigen::Vector2d(1.0, 0.0));
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    CHECK((coarse[k] - fine[k * 50]).norm() <= 1e-9);
  }
}

TEST_CASE("zero-noise trajectories match the analytic damped solution", "[testbeds]") {
  for (double zeta : {0.0, 0.1, 0.5}) {
    OscillatorConfig cfg;
    cfg.omega0 = 2.0;
    cfg.zeta = zeta;
    cfg.delta = 0.02;
    cfg.t_end = 15.0;
    cfg.spectral_intensity = 0.0;
    const auto traj = exp_euler_trajectory(cfg, 5, Eigen::Vector2d(1.0, 0.0));
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double t = k * cfg.delta;
      CHECK(std::fabs(traj[k][0] - oracles::damped_oscillation(cfg.omega0, zeta, t)) <=
            1e-8);
    }
  }
}

TEST_CASE("oscillator response statistic", "[testbeds]") {
  OscillatorConfig cfg;
  cfg.omega0 = 3.0;
  cfg.zeta = 0.05;
  cfg.delta = 0.01;

  // All-zero trajectory has no finite response.
  OscillatorConfig silent = cfg;
  silent.spectral_intensity = 0.0;
  CHECK_THROWS_AS(oscillator_response(silent, 3), AllZeroTrajectory);

  // Scaling the spectral intensity by c^2 shifts the response by exactly log c.
  for (double c : {0.5, 3.0}) {
    OscillatorConfig base = cfg, scaled = cfg;
    base.spectral_intensity = 1.0;
    scaled.spectral_intensity = c * c;
    const double r0 = oscillator_response(base, 11);
    const double r1 = oscillator_response(scaled, 11);
    CHECK(r1 - r0 == Catch::Approx(std::log(c)).margin(1e-12));
  }

  // Determinism of the seeded sample median.
  auto median_of_200 = [&](std::uint64_t base_seed) {
    std::vector<double> v;
    OscillatorConfig c2 = cfg;
    c2.spectral_intensity = 1.0;
    for (int s = 0; s < 200; ++s) v.push_back(oscillator_response(c2, base_seed + s));
    std::nth_element(v.begin(), v.begin() + 100, v.end());
    return v[100];
  };
  CHECK(median_of_200(500) == Catch::Approx(median_of_200(500)).margin(1e-12));
}

TEST_CASE("coarse levels inflate the response variance", "[testbeds]") {
  // Large-sample one-sided test on the log variance ratio; var(log s^2) is
  // approximately 2/(n-1) per sample, so the 1% critical value is 2.326.
  const int n = 500;
  auto sample_var = [&](double delta, std::uint64_t base) {
    OscillatorConfig cfg;
    cfg.omega0 = 3.0;
    cfg.zeta = 0.05;
    cfg.delta = delta;
    cfg.spectral_intensity = 1.0;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < n; ++s) {
      const double r = oscillator_response(cfg, base + s);
      sum += r;
      sumsq += r * r;
    }
    const double mean = sum / n;
    return (sumsq - n * mean * mean) / (n - 1);
  };
  const double v_coarse = sample_var(1.0, 10000);
  const double v_ref = sample_var(0.01, 20000);
  const double z = (std::log(v_coarse) - std::log(v_ref)) / std::sqrt(4.0 / (n - 1));
  CHECK(z > 2.326);
}

TEST_CASE("evaluation cost models", "[testbeds]") {
  const CostModel affine = CostModel::affine_model(0.0098, 0.0208);
  CHECK(std::fabs(1.0 / cost_eval(affine, 1.0) - 32.7) <= 0.1);
  CHECK(std::fabs(1.0 / cost_eval(affine, 0.2) - 14.3) <= 0.1);
  CHECK(cost_eval(affine, 0.01) == Catch::Approx(1.0).margin(1e-3));

  const CostModel table = CostModel::table_model({1.0, 2.0}, {0.25, 1.0});
  CHECK(cost_eval(table, 1.0) == 0.25);
  CHECK(cost_eval(table, 2.0) / cost_eval(table, 1.0) == 4.0);
  CHECK_THROWS_AS(cost_eval(table, 3.0), UnknownLevel);
}

TEST_CASE("toy gp sampler", "[testbeds]") {
  const AdditiveModel prior = toy_model();
  const std::vector<double> grid = {-0.4, 0.0, 0.4};
  const std::vector<double> levels = {1.0, 0.0};

  const ToyGpPath a = toy_gp_sampler(prior, grid, levels, 0.4, 31);
  const ToyGpPath b = toy_gp_sampler(prior, grid, levels, 0.4, 31);
  CHECK(a.values == b.values);

  // Path variance at a fixed input: 5 at delta = 1, 1 at the ideal level.
  const int draws = 5000;
  double s1 = 0.0, q1 = 0.0, s0 = 0.0, q0 = 0.0;
  for (int d = 0; d < draws; ++d) {
    const ToyGpPath p = toy_gp_sampler(prior, grid, levels, 0.4, 100000 + d);
    const double v1 = p.value(0.0, 1.0), v0 = p.value(0.0, 0.0);
    s1 += v1;
    q1 += v1 * v1;
    s0 += v0;
    q0 += v0 * v0;
  }
  const double var1 = (q1 - s1 * s1 / draws) / (draws - 1);
  const double var0 = (q0 - s0 * s0 / draws) / (draws - 1);
  CHECK(std::fabs(var1 - 5.0) <= 0.25);  // 5%
  CHECK(std::fabs(var0 - 1.0) <= 0.05);

  // The observer adds noise around the path value.
  std::mt19937_64 rng = make_rng(9);
  double acc = 0.0;
  for (int i = 0; i < 2000; ++i) acc += a.observe(0.0, 1.0, rng) - a.value(0.0, 1.0);
  CHECK(std::fabs(acc / 2000.0) <= 0.03);

  CHECK_THROWS_AS(a.value(0.0, 0.7), UnknownLevel);
}
