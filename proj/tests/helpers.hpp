#ifndef MRSUR_TESTS_HELPERS_HPP
#define MRSUR_TESTS_HELPERS_HPP

#include <random>
#include <vector>

#include "mrsur/criteria.hpp"
#include "mrsur/gp_core.hpp"
#include "mrsur/mf_models.hpp"
#include "mrsur/rng.hpp"

namespace helpers {

inline mrsur::GpSpec iso_spec(mrsur::MaternKernel k, double mean = 0.0) {
  mrsur::GpSpec s;
  s.cov = [k](const mrsur::Point& a, const mrsur::Point& b) {
    return k((a.u - b.u).norm());
  };
  s.mean = [mean](const mrsur::Point&) { return mean; };
  return s;
}

// A fitted 1-D instance with integration nodes, either single-level
// (Matern kernel, all points at delta 0) or two-level additive.
struct Instance {
  mrsur::GpSpec spec;
  mrsur::NoiseModel noise;
  std::vector<mrsur::Point> X;
  Eigen::VectorXd z;
  Eigen::VectorXd obs_noise;
  mrsur::PosteriorState st;
  mrsur::IntegrationNodes mu;
  double z_crit = 0.0;
};

inline Instance random_instance(std::uint64_t seed, int n, double lambda,
                                int n_nodes, bool two_level = false,
                                bool profiled_mean = false) {
  std::mt19937_64 rng = mrsur::make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Instance inst;
  const std::vector<double> levels = two_level ? std::vector<double>{1.0, 0.5}
                                               : std::vector<double>{0.0};
  inst.noise = mrsur::NoiseModel::constant(levels, lambda);

  if (two_level) {
    mrsur::AdditiveModel m;
    m.base = mrsur::ProductMatern::iso(0.5 + unif(rng), 0.2 + 0.3 * unif(rng), 1);
    m.err_correlation = mrsur::ProductMatern::iso(1.0, 0.05 + 0.2 * unif(rng), 1);
    m.error_amplitude = 0.5 + 2.0 * unif(rng);
    m.brownian_exponent = 1.0 + unif(rng);
    m.mean = 0.0;
    inst.spec = mrsur::gp_spec(
        m, profiled_mean ? mrsur::MeanHandling::profiled : mrsur::MeanHandling::fixed);
  } else {
    mrsur::MaternKernel k{0.5 + unif(rng), 0.2 + 0.3 * unif(rng), mrsur::Matern::nu52};
    inst.spec = iso_spec(k);
    if (profiled_mean) {
      inst.spec.basis = [](const mrsur::Point&) { return Eigen::VectorXd::Ones(1); };
      inst.spec.basis_dim = 1;
    }
  }

  inst.z.resize(n);
  inst.obs_noise.resize(n);
  for (int i = 0; i < n; ++i) {
    const double lev = levels[i % levels.size()];
    inst.X.push_back(mrsur::Point::scalar(unif(rng), lev));
    inst.z[i] = 2.0 * gauss(rng);
    inst.obs_noise[i] = lambda;
  }
  inst.st = mrsur::fit(inst.spec, inst.X, inst.z, inst.obs_noise);

  const double ref_level = two_level ? 0.5 : 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    inst.mu.nodes.push_back(mrsur::Point::scalar(unif(rng), ref_level));
  }
  inst.mu.weights = Eigen::VectorXd::Constant(n_nodes, 1.0 / n_nodes);
  inst.z_crit = 0.5;
  return inst;
}

// Batch at a common level on fresh uniform locations.
inline mrsur::CandidateBatch random_batch(const Instance& inst, std::uint64_t seed,
                                          int q) {
  std::mt19937_64 rng = mrsur::make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double lev = inst.X.front().delta;
  mrsur::CandidateBatch cb;
  for (int l = 0; l < q; ++l) cb.points.push_back(mrsur::Point::scalar(unif(rng), lev));
  cb.cost = 1.0;
  return cb;
}

// Monte Carlo estimate of the expected gain: draw batch responses from the
// posterior predictive, refit, measure the drop of H.  Returns the standard
// error through *se.
inline double mc_gain(const Instance& inst, const mrsur::CandidateBatch& cb, int draws,
                      std::uint64_t seed, double* se) {
  const int q = static_cast<int>(cb.points.size());
  mrsur::CriterionEvaluator ev(inst.st, inst.noise, inst.z_crit, inst.mu);
  const double H_n = ev.H();

  // Posterior predictive over the batch.
  Eigen::VectorXd mean(q);
  Eigen::MatrixXd cov(q, q);
  std::vector<mrsur::QueryCache> qc;
  for (const auto& p : cb.points) qc.push_back(inst.st.query(p));
  for (int l = 0; l < q; ++l) {
    mean[l] = inst.st.mean(qc[l]);
    for (int m = 0; m <= l; ++m) {
      cov(l, m) = cov(m, l) = inst.st.cov(qc[l], qc[m]);
    }
    cov(l, l) = inst.st.var(qc[l]) + mrsur::noise_at(inst.noise, cb.points[l]);
  }
  Eigen::MatrixXd Ls = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

  std::mt19937_64 rng = mrsur::make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum = 0.0, sumsq = 0.0;
  std::vector<mrsur::Point> Xa = inst.X;
  for (const auto& p : cb.points) Xa.push_back(p);
  Eigen::VectorXd za(inst.z.size() + q), na(inst.z.size() + q);
  za.head(inst.z.size()) = inst.z;
  na.head(inst.z.size()) = inst.obs_noise;
  for (int l = 0; l < q; ++l) {
    na[inst.z.size() + l] = mrsur::noise_at(inst.noise, cb.points[l]);
  }
  for (int d = 0; d < draws; ++d) {
    Eigen::VectorXd xi(q);
    for (int l = 0; l < q; ++l) xi[l] = gauss(rng);
    za.tail(q) = mean + Ls * xi;
    mrsur::PosteriorState st2 = mrsur::fit(inst.spec, Xa, za, na);
    const double h = mrsur::uncertainty_H(st2, inst.noise, inst.z_crit, inst.mu);
    sum += h;
    sumsq += h * h;
  }
  const double m = sum / draws;
  if (se) *se = std::sqrt(std::max(sumsq / draws - m * m, 0.0) / draws);
  return H_n - m;
}

}  // namespace helpers

#endif  // MRSUR_TESTS_HELPERS_HPP
