#ifndef MRSUR_MF_MODELS_HPP
#define MRSUR_MF_MODELS_HPP

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "mrsur/errors.hpp"
#include "mrsur/gp_core.hpp"
#include "mrsur/point.hpp"

// Multi-fidelity prior structures over X = U x T: the Kennedy-O'Hagan
// auto-regressive model for a finite set of levels, the additive model with a
// Brownian-type error covariance in the fidelity parameter, and the
// level-keyed Gaussian noise model for stochastic simulators.

namespace mrsur {

// Product-form Matern correlation: one lengthscale per u coordinate.
struct ProductMatern {
  double variance = 1.0;
  Eigen::VectorXd lengthscales;  // size d
  Matern regularity = Matern::nu52;

  double correlation(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    double c = 1.0;
    for (Eigen::Index j = 0; j < lengthscales.size(); ++j) {
      c *= matern_correlation(regularity, std::fabs(u[j] - v[j]) / lengthscales[j]);
    }
    return c;
  }
  double operator()(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    return variance * correlation(u, v);
  }
  static ProductMatern iso(double variance, double lengthscale, Eigen::Index dim,
                           Matern nu = Matern::nu52) {
    ProductMatern k;
    k.variance = variance;
    k.lengthscales = Eigen::VectorXd::Constant(dim, lengthscale);
    k.regularity = nu;
    return k;
  }
};

namespace detail {

inline int find_level(const std::vector<double>& levels, double delta,
                      const char* who) {
  for (std::size_t s = 0; s < levels.size(); ++s) {
    const double tol = 1e-9 * std::max(1.0, std::fabs(levels[s]));
    if (std::fabs(levels[s] - delta) <= tol) return static_cast<int>(s);
  }
  std::ostringstream msg;
  msg << who << ": fidelity level " << delta << " not registered";
  throw UnknownLevel(msg.str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Auto-regressive (Kennedy-O'Hagan) model
// ---------------------------------------------------------------------------
//
// xi(., level 1) = eta_1, xi(., level s) = rho_{s-1} xi(., level s-1) + eta_s
// with independent GPs eta_s.  Unrolling gives
//   xi(u, level s) = sum_{i<=s} c_{i,s} eta_i(u),  c_{i,s} = prod_{j=i}^{s-1} rho_j,
// from which the closed-form cross-level covariance below follows.
struct ARModel {
  std::vector<double> levels;         // delta_1 .. delta_S, increasing fidelity
  std::vector<ProductMatern> kernels; // one per level
  Eigen::VectorXd means;              // constant mean of each eta_s
  Eigen::VectorXd rho;                // S-1 regression coefficients

  int num_levels() const { return static_cast<int>(levels.size()); }

  // c_{i,s} for 0-based level index s.
  double chain_coeff(int i, int s) const {
    double c = 1.0;
    for (int j = i; j < s; ++j) c *= rho[j];
    return c;
  }
};

inline double ar_cov(const ARModel& m, const Point& x, const Point& y) {
  const int s = detail::find_level(m.levels, x.delta, "ar_cov");
  const int t = detail::find_level(m.levels, y.delta, "ar_cov");
  const int lo = std::min(s, t);
  double c = 0.0;
  for (int i = 0; i <= lo; ++i) {
    c += m.chain_coeff(i, s) * m.chain_coeff(i, t) * m.kernels[i](x.u, y.u);
  }
  return c;
}

inline double ar_mean(const ARModel& m, const Point& x) {
  const int s = detail::find_level(m.levels, x.delta, "ar_mean");
  double v = 0.0;
  for (int i = 0; i <= s; ++i) v += m.chain_coeff(i, s) * m.means[i];
  return v;
}

// Basis for profiling the S unknown constant means by GLS.
inline Eigen::VectorXd ar_mean_basis(const ARModel& m, const Point& x) {
  const int s = detail::find_level(m.levels, x.delta, "ar_mean_basis");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m.num_levels());
  for (int i = 0; i <= s; ++i) h[i] = m.chain_coeff(i, s);
  return h;
}

// ---------------------------------------------------------------------------
// Additive model with Brownian-type error covariance
// ---------------------------------------------------------------------------
//
// xi(u, delta) = xi0(u) + eps(u, delta), cov(eps) = sigma0^2 G r(d,d') k_eps(u,u')
// with the Brownian-type default r(d,d') = min(d,d')^L, so the numerical-error
// part vanishes in the mean square as delta -> 0.  Other nonstationary
// fidelity covariances can be supplied through fidelity_cov.
struct AdditiveModel {
  ProductMatern base;             // k0 over U, carries sigma0^2
  ProductMatern err_correlation;  // correlation only; variance field ignored
  double error_amplitude = 0.0;   // G >= 0
  double brownian_exponent = 1.0; // L > 0
  double mean = 0.0;              // constant mean m
  std::function<double(double, double)> fidelity_cov;  // optional r(d, d')

  double r(double d1, double d2) const {
    if (fidelity_cov) return fidelity_cov(d1, d2);
    const double md = std::min(d1, d2);
    return md > 0.0 ? std::pow(md, brownian_exponent) : 0.0;
  }
};

inline double additive_cov(const AdditiveModel& m, const Point& x, const Point& y) {
  double c = m.base(x.u, y.u);
  if (m.error_amplitude > 0.0) {
    const double r = m.r(x.delta, y.delta);
    if (r != 0.0) {
      c += m.base.variance * m.error_amplitude * r * m.err_correlation.correlation(x.u, y.u);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Level-keyed noise model
// ---------------------------------------------------------------------------

struct NoiseModel {
  std::vector<double> levels;
  Eigen::VectorXd variances;  // lambda(delta_s) >= 0

  static NoiseModel zero(const std::vector<double>& levels) {
    NoiseModel nm;
    nm.levels = levels;
    nm.variances = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(levels.size()));
    return nm;
  }
  static NoiseModel constant(const std::vector<double>& levels, double lambda) {
    NoiseModel nm;
    nm.levels = levels;
    nm.variances =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(levels.size()), lambda);
    return nm;
  }
  double at_delta(double delta) const {
    return variances[detail::find_level(levels, delta, "noise_at")];
  }
};

inline double noise_at(const NoiseModel& nm, const Point& x) {
  return nm.at_delta(x.delta);
}

// ---------------------------------------------------------------------------
// GpSpec adapters
// ---------------------------------------------------------------------------

enum class MeanHandling { fixed, profiled };

inline GpSpec gp_spec(const ARModel& m, MeanHandling mh = MeanHandling::profiled) {
  GpSpec s;
  s.cov = [m](const Point& a, const Point& b) { return ar_cov(m, a, b); };
  s.mean = [m](const Point& a) { return ar_mean(m, a); };
  if (mh == MeanHandling::profiled) {
    s.basis = [m](const Point& a) { return ar_mean_basis(m, a); };
    s.basis_dim = m.num_levels();
  }
  return s;
}

inline GpSpec gp_spec(const AdditiveModel& m, MeanHandling mh = MeanHandling::profiled) {
  GpSpec s;
  s.cov = [m](const Point& a, const Point& b) { return additive_cov(m, a, b); };
  s.mean = [m](const Point&) { return m.mean; };
  if (mh == MeanHandling::profiled) {
    s.basis = [](const Point&) { return Eigen::VectorXd::Ones(1); };
    s.basis_dim = 1;
  }
  return s;
}

}  // namespace mrsur

#endif  // MRSUR_MF_MODELS_HPP
