#ifndef MRSUR_GP_CORE_HPP
#define MRSUR_GP_CORE_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "mrsur/errors.hpp"
#include "mrsur/point.hpp"

namespace mrsur {

// ---------------------------------------------------------------------------
// Matern kernels
// ---------------------------------------------------------------------------

enum class Matern { nu12, nu32, nu52 };

// Matern correlation M_nu(h) at normalized distance h >= 0.
inline double matern_correlation(Matern nu, double h) {
  switch (nu) {
    case Matern::nu12:
      return std::exp(-h);
    case Matern::nu32: {
      const double s = 1.7320508075688772935274463 * h;  // sqrt(3) h
      return (1.0 + s) * std::exp(-s);
    }
    case Matern::nu52:
    default: {
      const double s = 2.2360679774997896964091737 * h;  // sqrt(5) h
      return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
}

// Stationary Matern kernel on a scalar distance.
struct MaternKernel {
  double variance = 1.0;     // sigma^2
  double lengthscale = 1.0;  // rho, same units as the input coordinate
  Matern regularity = Matern::nu52;

  double operator()(double d) const {
    return variance * matern_correlation(regularity, d / lengthscale);
  }
};

inline double kernel_eval(const MaternKernel& k, double d) { return k(d); }

// ---------------------------------------------------------------------------
// Generic GP prior description consumed by fit()
// ---------------------------------------------------------------------------

// mean() is the fixed part of the prior mean.  When basis_dim > 0 the mean is
// instead a linear combination h(x)'beta of basis functions with improper
// uniform priors on beta; the coefficients are profiled out by generalized
// least squares inside fit, and the profiling uncertainty enters the
// posterior covariance.
struct GpSpec {
  std::function<double(const Point&, const Point&)> cov;
  std::function<double(const Point&)> mean = [](const Point&) { return 0.0; };
  std::function<Eigen::VectorXd(const Point&)> basis;
  int basis_dim = 0;
};

struct FitOptions {
  double jitter_rel_init = 1e-10;
  double jitter_rel_max = 1e-4;
};

class PosteriorState;

// Per-query solve results; lets callers evaluate many posterior covariances
// without repeating the O(n^2) triangular solves.
struct QueryCache {
  Point x;
  double prior_var = 0.0;
  double mean_n = 0.0;
  Eigen::VectorXd v;  // L^{-1} k(X, x)
  Eigen::VectorXd g;  // L_B^{-1} (h(x) - W' v), empty unless mean is profiled
};

// Immutable fitted GP: all queries are read-only and thread-safe.
class PosteriorState {
 public:
  PosteriorState() = default;

  friend PosteriorState fit(const GpSpec&, const std::vector<Point>&,
                            const Eigen::VectorXd&, const Eigen::VectorXd&,
                            const FitOptions&);

  int size() const { return static_cast<int>(pts_.size()); }
  int basis_dim() const { return spec_.basis_dim; }
  double jitter() const { return jitter_; }
  const std::vector<Point>& inputs() const { return pts_; }
  const Eigen::VectorXd& responses() const { return z_; }
  const Eigen::VectorXd& noise() const { return noise_; }
  const GpSpec& spec() const { return spec_; }
  const Eigen::VectorXd& gls_coefficients() const { return beta_; }

  double prior_cov(const Point& a, const Point& b) const { return spec_.cov(a, b); }

  QueryCache query(const Point& x) const {
    QueryCache q;
    q.x = x;
    q.prior_var = spec_.cov(x, x);
    if (size() == 0) {
      q.mean_n = spec_.mean(x);
      return q;
    }
    Eigen::VectorXd kx(size());
    for (int i = 0; i < size(); ++i) kx[i] = spec_.cov(pts_[i], x);
    q.v = L_.triangularView<Eigen::Lower>().solve(kx);
    if (profiled_) {
      Eigen::VectorXd u = spec_.basis(x) - W_.transpose() * q.v;
      q.g = LB_.triangularView<Eigen::Lower>().solve(u);
      q.mean_n = spec_.basis(x).dot(beta_) + q.v.dot(w_resid_);
    } else {
      q.mean_n = spec_.mean(x) + q.v.dot(w_resid_);
    }
    return q;
  }

  double mean(const QueryCache& q) const { return q.mean_n; }

  // Posterior covariance k_n(x1, x2).
  double cov(const QueryCache& a, const QueryCache& b) const {
    double c = spec_.cov(a.x, b.x);
    if (size() == 0) return c;
    c -= a.v.dot(b.v);
    if (profiled_) c += a.g.dot(b.g);
    return c;
  }

  // Posterior variance, clamped at zero against roundoff.
  double var(const QueryCache& q) const {
    double c = q.prior_var;
    if (size() > 0) {
      c -= q.v.squaredNorm();
      if (profiled_) c += q.g.squaredNorm();
    }
    return std::max(c, 0.0);
  }

  bool mean_profiled() const { return profiled_; }
  double log_marginal_likelihood() const { return lml_; }

 private:
  GpSpec spec_;
  std::vector<Point> pts_;
  Eigen::VectorXd z_, noise_;
  Eigen::MatrixXd L_;        // lower Cholesky of K + diag(noise) + jitter I
  Eigen::VectorXd w_resid_;  // L^{-1} (z - mean)
  bool profiled_ = false;
  Eigen::MatrixXd W_;        // L^{-1} H
  Eigen::MatrixXd LB_;       // lower Cholesky of W'W
  Eigen::VectorXd beta_;     // GLS mean coefficients
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

// Conditions the prior on (pts, z) with per-observation Gaussian noise
// variances.  Jitter starts at jitter_rel_init * mean(diag) and escalates
// tenfold until the Cholesky succeeds or jitter_rel_max * mean(diag) is
// exceeded, in which case CholeskyFailure carries condition diagnostics.
inline PosteriorState fit(const GpSpec& spec, const std::vector<Point>& pts,
                          const Eigen::VectorXd& z, const Eigen::VectorXd& noise,
                          const FitOptions& opt = {}) {
  const int n = static_cast<int>(pts.size());
  PosteriorState st;
  st.spec_ = spec;
  st.pts_ = pts;
  st.z_ = z;
  st.noise_ = noise;
  if (n == 0) return st;
  if (z.size() != n || noise.size() != n) {
    throw Error("fit: inputs, responses and noise variances must have equal length");
  }

  Eigen::MatrixXd A(n, n);
  double kdiag = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = spec.cov(pts[i], pts[j]);
      A(i, j) = v;
      A(j, i) = v;
    }
    kdiag += A(i, i);
    A(i, i) += noise[i];
  }
  // Jitter scales with the kernel Gram diagonal; noise variances can be
  // arbitrarily large without inflating it.
  const double mdiag = std::max(kdiag / n, 1e-300);

  double jitter = opt.jitter_rel_init * mdiag;
  const double jitter_max = opt.jitter_rel_max * mdiag;
  Eigen::LLT<Eigen::MatrixXd> llt;
  while (true) {
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += jitter;
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (jitter > jitter_max) {
      std::ostringstream msg;
      msg << "fit: Cholesky failed up to jitter " << jitter / 10.0 << " (n=" << n
          << ", mean diag=" << mdiag << ", min diag=" << A.diagonal().minCoeff()
          << ", max |K|=" << A.cwiseAbs().maxCoeff() << ")";
      throw CholeskyFailure(msg.str());
    }
  }
  st.jitter_ = jitter;
  st.L_ = llt.matrixL();

  const auto Ltri = st.L_.triangularView<Eigen::Lower>();
  static const double log_2pi = 1.8378770664093454835606594;
  const double log_det_A = 2.0 * st.L_.diagonal().array().log().sum();

  if (spec.basis_dim > 0) {
    const int p = spec.basis_dim;
    if (n < p) throw RankDeficientBasis("fit: fewer observations than mean basis columns");
    Eigen::MatrixXd H(n, p);
    for (int i = 0; i < n; ++i) H.row(i) = spec.basis(pts[i]).transpose();
    st.W_ = Ltri.solve(H);
    Eigen::MatrixXd B = st.W_.transpose() * st.W_;
    Eigen::LLT<Eigen::MatrixXd> lltB(B);
    if (lltB.info() != Eigen::Success) {
      throw RankDeficientBasis("fit: mean basis is rank deficient on the data");
    }
    st.LB_ = lltB.matrixL();
    const Eigen::VectorXd y = Ltri.solve(z);
    st.beta_ = lltB.solve(st.W_.transpose() * y);
    st.w_resid_ = y - st.W_ * st.beta_;
    st.profiled_ = true;
    const double log_det_B = 2.0 * st.LB_.diagonal().array().log().sum();
    // Marginal likelihood with the mean coefficients integrated out under
    // improper uniform priors.
    st.lml_ = -0.5 * st.w_resid_.squaredNorm() - 0.5 * log_det_A - 0.5 * log_det_B -
              0.5 * (n - p) * log_2pi;
  } else {
    Eigen::VectorXd resid(n);
    for (int i = 0; i < n; ++i) resid[i] = z[i] - spec.mean(pts[i]);
    st.w_resid_ = Ltri.solve(resid);
    st.lml_ = -0.5 * st.w_resid_.squaredNorm() - 0.5 * log_det_A - 0.5 * n * log_2pi;
  }
  return st;
}

inline double log_marginal_likelihood(const PosteriorState& st) {
  return st.log_marginal_likelihood();
}

// Posterior mean at q1 and posterior covariance k_n(q1, q2).
inline std::pair<double, double> posterior_mean_cov(const PosteriorState& st,
                                                    const Point& q1, const Point& q2) {
  const QueryCache a = st.query(q1);
  const QueryCache b = st.query(q2);
  return {st.mean(a), st.cov(a, b)};
}

}  // namespace mrsur

#endif  // MRSUR_GP_CORE_HPP
