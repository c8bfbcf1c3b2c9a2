#ifndef MRSUR_INFERENCE_HPP
#define MRSUR_INFERENCE_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mrsur/dataset.hpp"
#include "mrsur/design.hpp"
#include "mrsur/errors.hpp"
#include "mrsur/gp_core.hpp"
#include "mrsur/mf_models.hpp"
#include "mrsur/rng.hpp"

// Hyperparameter inference: weakly informative priors, the log posterior
// built on the profiled marginal likelihood, an adaptive random-walk
// Metropolis-Hastings sampler (Haario, Saksman and Tamminen 2001), and the
// MAP plug-in obtained by local search from the best sample.

namespace mrsur {

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

enum class PriorKind { improper_uniform, normal, log_normal };

// One sampled parameter.  When log_domain is true the sampler coordinate is
// log(parameter); a log-normal prior then contributes a plain normal density
// in the sampler coordinate (Jacobian included).
struct ParamPrior {
  std::string name;
  PriorKind kind = PriorKind::improper_uniform;
  double loc = 0.0;
  double scale = 1.0;
  bool log_domain = false;

  static ParamPrior lognormal(std::string name, double loc, double scale) {
    return {std::move(name), PriorKind::log_normal, loc, scale, true};
  }
  static ParamPrior gaussian(std::string name, double loc, double scale) {
    return {std::move(name), PriorKind::normal, loc, scale, false};
  }
};

struct PriorSpec {
  std::vector<ParamPrior> params;
  int dim() const { return static_cast<int>(params.size()); }
};

inline double log_prior(const PriorSpec& spec, const Eigen::VectorXd& theta) {
  static const double log_2pi = 1.8378770664093454835606594;
  double lp = 0.0;
  for (int j = 0; j < spec.dim(); ++j) {
    const ParamPrior& pr = spec.params[j];
    const double x = theta[j];
    switch (pr.kind) {
      case PriorKind::improper_uniform:
        break;
      case PriorKind::normal: {
        const double t = (x - pr.loc) / pr.scale;
        lp += -0.5 * t * t - std::log(pr.scale) - 0.5 * log_2pi;
        break;
      }
      case PriorKind::log_normal: {
        double lx;
        if (pr.log_domain) {
          lx = x;  // sampler works on log(parameter)
        } else {
          if (x <= 0.0) return -std::numeric_limits<double>::infinity();
          lx = std::log(x);
          lp -= lx;  // Jacobian of the natural-domain density
        }
        const double t = (lx - pr.loc) / pr.scale;
        lp += -0.5 * t * t - std::log(pr.scale) - 0.5 * log_2pi;
        break;
      }
    }
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Model families and the log posterior
// ---------------------------------------------------------------------------

struct BuiltModel {
  GpSpec gp;
  NoiseModel noise;
};

// Maps a sampler-domain parameter vector to a concrete prior + noise model.
struct ModelFamily {
  PriorSpec priors;
  std::function<BuiltModel(const Eigen::VectorXd&)> build;
  std::function<bool(const Eigen::VectorXd&)> in_support;  // optional extra checks
};

inline double log_posterior(const ModelFamily& family, const Dataset& data,
                            const Eigen::VectorXd& theta) {
  static const double neg_inf = -std::numeric_limits<double>::infinity();
  if (family.in_support && !family.in_support(theta)) return neg_inf;
  const double lp = log_prior(family.priors, theta);
  if (!std::isfinite(lp)) return neg_inf;
  BuiltModel m = family.build(theta);
  Eigen::VectorXd noise(data.size());
  for (int i = 0; i < data.size(); ++i) noise[i] = noise_at(m.noise, data.points[i]);
  try {
    PosteriorState st = fit(m.gp, data.points, data.response_vector(), noise);
    const double lml = st.log_marginal_likelihood();
    if (!std::isfinite(lml)) return neg_inf;
    return lp + lml;
  } catch (const CholeskyFailure&) {
    return neg_inf;
  } catch (const RankDeficientBasis&) {
    return neg_inf;
  }
}

// ---------------------------------------------------------------------------
// Adaptive Metropolis-Hastings
// ---------------------------------------------------------------------------

struct MhOptions {
  int warmup = 200;          // iterations before the empirical covariance kicks in
  double init_step = 0.1;    // isotropic proposal sd during warmup
  double cov_floor = 1e-10;  // epsilon added to the adapted covariance diagonal
};

struct Chain {
  Eigen::MatrixXd samples;       // (n_iter + 1) x d, first row is the init
  Eigen::VectorXd log_post;      // matching log-posterior trace
  Eigen::MatrixXd proposal_cov;  // covariance in force at the end of the run
  double acceptance_rate = 0.0;

  int length() const { return static_cast<int>(samples.rows()); }
  int best_index() const {
    int b = 0;
    for (int i = 1; i < length(); ++i) {
      if (log_post[i] > log_post[b]) b = i;
    }
    return b;
  }
};

// Random-walk Metropolis with the proposal covariance adapted to
// (2.38^2/d) * (empirical chain covariance + floor * I) after warmup.
inline Chain adaptive_mh(const std::function<double(const Eigen::VectorXd&)>& log_post,
                         const Eigen::VectorXd& init, int n_iter, std::uint64_t seed,
                         const MhOptions& opt = {}) {
  const int d = static_cast<int>(init.size());
  double lp = log_post(init);
  if (!std::isfinite(lp)) throw InitInvalid("adaptive_mh: log posterior not finite at init");

  Chain chain;
  chain.samples.resize(n_iter + 1, d);
  chain.log_post.resize(n_iter + 1);
  chain.samples.row(0) = init.transpose();
  chain.log_post[0] = lp;

  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double sd = 2.38 * 2.38 / std::max(d, 1);
  Eigen::VectorXd x = init;
  Eigen::VectorXd mean = init;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd prop =
      Eigen::MatrixXd::Identity(d, d) * (opt.init_step * opt.init_step);
  Eigen::LLT<Eigen::MatrixXd> llt(prop);
  int accepted = 0;

  for (int t = 1; t <= n_iter; ++t) {
    Eigen::VectorXd xi(d);
    for (int j = 0; j < d; ++j) xi[j] = gauss(rng);
    const Eigen::VectorXd y = x + llt.matrixL() * xi;
    const double lpy = log_post(y);
    if (std::isfinite(lpy) && std::log(unif(rng)) < lpy - lp) {
      x = y;
      lp = lpy;
      ++accepted;
    }
    chain.samples.row(t) = x.transpose();
    chain.log_post[t] = lp;

    // Recursive update of the running mean / covariance over all samples.
    const Eigen::VectorXd delta = x - mean;
    mean += delta / (t + 1);
    cov = cov * (static_cast<double>(t - 1) / t) +
          (delta * delta.transpose()) * (1.0 / (t + 1));
    if (t >= opt.warmup) {
      prop = sd * cov;
      prop.diagonal().array() += sd * opt.cov_floor;
      Eigen::LLT<Eigen::MatrixXd> trial(prop);
      if (trial.info() == Eigen::Success) llt = trial;
    }
  }
  chain.proposal_cov = prop;
  chain.acceptance_rate = n_iter > 0 ? static_cast<double>(accepted) / n_iter : 0.0;
  return chain;
}

// ---------------------------------------------------------------------------
// MAP plug-in
// ---------------------------------------------------------------------------

struct MapOptions {
  int halvings = 25;
  int max_evals = 0;  // 0: 250 * d
};

// Derivative-free polish from the best chain sample; the result never has a
// lower log posterior than any chain sample.
inline Eigen::VectorXd map_estimate(const Chain& chain,
                                    const std::function<double(const Eigen::VectorXd&)>& log_post,
                                    const MapOptions& opt = {}) {
  if (chain.length() == 0) throw Error("map_estimate: empty chain");
  const int d = static_cast<int>(chain.samples.cols());
  const Eigen::VectorXd x0 = chain.samples.row(chain.best_index()).transpose();

  Eigen::VectorXd steps(d);
  for (int j = 0; j < d; ++j) {
    double s = 0.0;
    if (chain.proposal_cov.size() > 0) s = std::sqrt(std::max(chain.proposal_cov(j, j), 0.0));
    steps[j] = std::max(s, 1e-4 * (1.0 + std::fabs(x0[j])));
  }
  const int max_evals = opt.max_evals > 0 ? opt.max_evals : 250 * d;
  return coordinate_maximize(log_post, x0, steps, opt.halvings, max_evals);
}

inline void to_csv(const Chain& chain, std::ostream& os) {
  os << "iteration,log_posterior";
  for (int j = 0; j < chain.samples.cols(); ++j) os << ",theta" << j + 1;
  os << "\n";
  os.precision(17);
  for (int i = 0; i < chain.length(); ++i) {
    os << i << "," << chain.log_post[i];
    for (int j = 0; j < chain.samples.cols(); ++j) os << "," << chain.samples(i, j);
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Concrete model families
// ---------------------------------------------------------------------------

// Auto-regressive family over a fixed level set, 5/2 Matern components with
// per-level variance and inverse lengthscale sampled in log domain, level
// regression coefficients with N(1, 2^2) priors, constant means profiled.
// theta = [log s2_1, log a_1, ..., log s2_S, log a_S, rho_1, ..., rho_{S-1}].
inline ModelFamily make_ar_family(std::vector<double> levels, int u_dim,
                                  NoiseModel noise) {
  const int S = static_cast<int>(levels.size());
  ModelFamily fam;
  for (int s = 1; s <= S; ++s) {
    fam.priors.params.push_back(ParamPrior::lognormal(
        "sigma2_" + std::to_string(s), 2.0 * std::log(0.2), std::log(100.0)));
    fam.priors.params.push_back(
        ParamPrior::lognormal("a_" + std::to_string(s), std::log(2.0), std::log(10.0)));
  }
  for (int s = 1; s < S; ++s) {
    fam.priors.params.push_back(ParamPrior::gaussian("rho_" + std::to_string(s), 1.0, 2.0));
  }
  fam.build = [levels = std::move(levels), u_dim, noise = std::move(noise),
               S](const Eigen::VectorXd& theta) {
    ARModel m;
    m.levels = levels;
    m.means = Eigen::VectorXd::Zero(S);
    m.rho.resize(S - 1);
    for (int s = 0; s < S; ++s) {
      const double s2 = std::exp(theta[2 * s]);
      const double a = std::exp(theta[2 * s + 1]);
      m.kernels.push_back(ProductMatern::iso(s2, 1.0 / a, u_dim, Matern::nu52));
    }
    for (int s = 0; s < S - 1; ++s) m.rho[s] = theta[2 * S + s];
    BuiltModel bm;
    bm.gp = gp_spec(m, MeanHandling::profiled);
    bm.noise = noise;
    return bm;
  };
  return fam;
}

// Additive family with Brownian-type error covariance and one noise variance
// per fidelity level, everything positive sampled in log domain, constant
// mean profiled.  Prior locations for the variance-like parameters come from
// an empirical response-variance heuristic.
// theta = [log s2_0, log a0_1..d, log G, log L, log ae_1..d, log lam_1..S].
inline ModelFamily make_additive_family(std::vector<double> levels, int u_dim,
                                        double var_heuristic) {
  const int S = static_cast<int>(levels.size());
  const double loc_var = std::log(std::max(var_heuristic, 1e-8));
  ModelFamily fam;
  fam.priors.params.push_back(ParamPrior::lognormal("sigma2_0", loc_var, std::log(100.0)));
  for (int j = 1; j <= u_dim; ++j) {
    fam.priors.params.push_back(
        ParamPrior::lognormal("a0_" + std::to_string(j), std::log(2.0), std::log(10.0)));
  }
  fam.priors.params.push_back(ParamPrior::lognormal("G", 0.0, std::log(10.0)));
  fam.priors.params.push_back(ParamPrior::lognormal("L", std::log(2.0), std::log(10.0)));
  for (int j = 1; j <= u_dim; ++j) {
    fam.priors.params.push_back(
        ParamPrior::lognormal("ae_" + std::to_string(j), std::log(2.0), std::log(10.0)));
  }
  for (int s = 1; s <= S; ++s) {
    fam.priors.params.push_back(ParamPrior::lognormal(
        "lambda_" + std::to_string(s), loc_var - std::log(4.0), std::log(100.0)));
  }
  fam.build = [levels = std::move(levels), u_dim, S](const Eigen::VectorXd& theta) {
    int k = 0;
    AdditiveModel m;
    const double s2 = std::exp(theta[k++]);
    Eigen::VectorXd ls0(u_dim), lse(u_dim);
    for (int j = 0; j < u_dim; ++j) ls0[j] = std::exp(-theta[k++]);  // 1/a
    m.error_amplitude = std::exp(theta[k++]);
    m.brownian_exponent = std::exp(theta[k++]);
    for (int j = 0; j < u_dim; ++j) lse[j] = std::exp(-theta[k++]);
    m.base = ProductMatern{s2, ls0, Matern::nu52};
    m.err_correlation = ProductMatern{1.0, lse, Matern::nu52};
    m.mean = 0.0;
    NoiseModel nm;
    nm.levels = levels;
    nm.variances.resize(S);
    for (int s = 0; s < S; ++s) nm.variances[s] = std::exp(theta[k++]);
    BuiltModel bm;
    bm.gp = gp_spec(m, MeanHandling::profiled);
    bm.noise = std::move(nm);
    return bm;
  };
  return fam;
}

// Prior-mode initial point for a family (improper-uniform entries start at 0).
inline Eigen::VectorXd prior_mode(const PriorSpec& spec) {
  Eigen::VectorXd theta(spec.dim());
  for (int j = 0; j < spec.dim(); ++j) {
    const ParamPrior& pr = spec.params[j];
    if (pr.kind == PriorKind::improper_uniform) {
      theta[j] = 0.0;
    } else if (pr.kind == PriorKind::log_normal && !pr.log_domain) {
      theta[j] = std::exp(pr.loc - pr.scale * pr.scale);  // natural-domain mode
    } else {
      theta[j] = pr.loc;
    }
  }
  return theta;
}

}  // namespace mrsur

#endif  // MRSUR_INFERENCE_HPP
