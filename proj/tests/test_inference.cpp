#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "mrsur/inference.hpp"

using namespace mrsur;

namespace {

// One-parameter family: a free noise variance with a log-normal prior in the
// *natural* domain, fixed Matern kernel, one observation.
ModelFamily scalar_lambda_family(bool log_domain) {
  ModelFamily fam;
  ParamPrior pr;
  pr.name = "lambda";
  pr.kind = PriorKind::log_normal;
  pr.loc = std::log(0.5);
  pr.scale = 0.8;
  pr.log_domain = log_domain;
  fam.priors.params.push_back(pr);
  fam.build = [log_domain](const Eigen::VectorXd& theta) {
    const double lambda = log_domain ? std::exp(theta[0]) : theta[0];
    BuiltModel bm;
    bm.gp = helpers::iso_spec({1.0, 0.3, Matern::nu52});
    bm.noise = NoiseModel::constant({0.0}, lambda);
    return bm;
  };
  return fam;
}

Dataset one_observation() {
  Dataset d;
  d.add(Point::scalar(0.4, 0.0), 1.3, 1.0);
  return d;
}

}  // namespace

TEST_CASE("log posterior support and flat-prior differences", "[inference]") {
  Dataset data = one_observation();

  // Negative variance is outside the support.
  ModelFamily natural = scalar_lambda_family(false);
  Eigen::VectorXd bad(1);
  bad << -0.5;
  CHECK(std::isinf(log_posterior(natural, data, bad)));
  CHECK(log_posterior(natural, data, bad) < 0.0);

  // With an improper uniform prior the posterior difference equals the
  // marginal-likelihood difference.
  ModelFamily flat;
  flat.priors.params.push_back({"shift", PriorKind::improper_uniform, 0.0, 1.0, false});
  flat.build = [](const Eigen::VectorXd& theta) {
    BuiltModel bm;
    bm.gp = helpers::iso_spec({1.0, 0.3, Matern::nu52}, theta[0]);
    bm.noise = NoiseModel::constant({0.0}, 0.1);
    return bm;
  };
  auto lml_at = [&](double shift) {
    BuiltModel bm = flat.build(Eigen::VectorXd::Constant(1, shift));
    Eigen::VectorXd lam(1);
    lam << 0.1;
    return log_marginal_likelihood(fit(bm.gp, data.points, data.response_vector(), lam));
  };
  Eigen::VectorXd t1(1), t2(1);
  t1 << 0.2;
  t2 << 1.1;
  CHECK(log_posterior(flat, data, t1) - log_posterior(flat, data, t2) ==
        Catch::Approx(lml_at(0.2) - lml_at(1.1)).margin(1e-12));
}

TEST_CASE("scalar conjugate-style check against a grid-search oracle", "[inference]") {
  Dataset data = one_observation();
  ModelFamily fam = scalar_lambda_family(true);  // sampled as log(lambda)
  auto lp = [&](const Eigen::VectorXd& th) { return log_posterior(fam, data, th); };

  // Oracle: coarse bracket then golden-section refinement of the 1-D mode.
  double best_x = 0.0, best_v = -1e300;
  for (double x = -6.0; x <= 6.0; x += 0.01) {
    const double v = lp(Eigen::VectorXd::Constant(1, x));
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double a = best_x - 0.02, b = best_x + 0.02;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  for (int it = 0; it < 80; ++it) {
    if (lp(Eigen::VectorXd::Constant(1, c)) > lp(Eigen::VectorXd::Constant(1, d))) {
      b = d;
    } else {
      a = c;
    }
    c = b - gr * (b - a);
    d = a + gr * (b - a);
  }
  const double oracle_mode = 0.5 * (a + b);

  Chain chain = adaptive_mh(lp, Eigen::VectorXd::Constant(1, std::log(0.5)), 3000, 42);
  MapOptions mo;
  mo.halvings = 40;
  mo.max_evals = 5000;
  const Eigen::VectorXd mode = map_estimate(chain, lp, mo);
  CHECK(std::fabs(mode[0] - oracle_mode) <= 1e-6);
}

TEST_CASE("adaptive metropolis on a gaussian target", "[inference]") {
  auto lp = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  const Eigen::VectorXd init = Eigen::VectorXd::Constant(2, 3.0);

  Chain chain = adaptive_mh(lp, init, 50000, 7);
  REQUIRE(chain.length() == 50001);
  const int burn = 5000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int i = burn; i < chain.length(); ++i) mean += chain.samples.row(i).transpose();
  mean /= (chain.length() - burn);
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (int i = burn; i < chain.length(); ++i) {
    const Eigen::Vector2d d = chain.samples.row(i).transpose() - mean;
    var += d.cwiseProduct(d);
  }
  var /= (chain.length() - burn);
  CHECK(std::fabs(mean[0]) <= 0.05);
  CHECK(std::fabs(mean[1]) <= 0.05);
  CHECK(std::fabs(var[0] - 1.0) <= 0.1);
  CHECK(std::fabs(var[1] - 1.0) <= 0.1);
  CHECK(chain.acceptance_rate >= 0.1);
  CHECK(chain.acceptance_rate <= 0.6);

  // Determinism and the zero-iteration chain.
  Chain again = adaptive_mh(lp, init, 1000, 99);
  Chain again2 = adaptive_mh(lp, init, 1000, 99);
  CHECK(again.samples == again2.samples);
  Chain empty = adaptive_mh(lp, init, 0, 1);
  REQUIRE(empty.length() == 1);
  CHECK(empty.samples.row(0) == init.transpose());

  auto invalid = [](const Eigen::VectorXd&) {
    return -std::numeric_limits<double>::infinity();
  };
  CHECK_THROWS_AS(adaptive_mh(invalid, init, 10, 1), InitInvalid);
}

TEST_CASE("map estimate polishes the best chain sample", "[inference]") {
  // Correlated quadratic with a known maximizer.
  Eigen::Matrix2d A;
  A << 2.0, 0.6, 0.6, 1.0;
  const Eigen::Vector2d opt(0.7, -0.3);
  auto lp = [&](const Eigen::VectorXd& x) {
    const Eigen::Vector2d d = x - opt;
    return -0.5 * d.dot(A * d);
  };

  Chain chain = adaptive_mh(lp, Eigen::VectorXd::Zero(2), 4000, 13);
  MapOptions mo;
  mo.halvings = 40;
  mo.max_evals = 20000;
  const Eigen::VectorXd mode = map_estimate(chain, lp, mo);
  CHECK((mode - Eigen::VectorXd(opt)).norm() <= 1e-4);
  CHECK(lp(mode) >= chain.log_post.maxCoeff());

  // A chain already containing the exact maximizer is returned unchanged.
  Chain exact;
  exact.samples = opt.transpose();
  exact.log_post = Eigen::VectorXd::Constant(1, lp(opt));
  const Eigen::VectorXd kept = map_estimate(exact, lp);
  CHECK(kept == Eigen::VectorXd(opt));
}

TEST_CASE("map estimate stays inside the prior support", "[inference]") {
  Dataset data = one_observation();
  ModelFamily fam = scalar_lambda_family(false);  // natural domain, support (0, inf)
  auto lp = [&](const Eigen::VectorXd& th) { return log_posterior(fam, data, th); };
  Chain chain = adaptive_mh(lp, Eigen::VectorXd::Constant(1, 0.4), 2000, 3);
  const Eigen::VectorXd mode = map_estimate(chain, lp);
  CHECK(mode[0] > 0.0);
  CHECK(std::isfinite(lp(mode)));
}

TEST_CASE("chain csv export", "[inference]") {
  auto lp = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  Chain chain = adaptive_mh(lp, Eigen::VectorXd::Zero(2), 5, 21);
  std::ostringstream os;
  to_csv(chain, os);
  const std::string text = os.str();
  CHECK(text.rfind("iteration,log_posterior,theta1,theta2\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);  // header + 6 rows
}
