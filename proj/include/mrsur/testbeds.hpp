#ifndef MRSUR_TESTBEDS_HPP
#define MRSUR_TESTBEDS_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "mrsur/errors.hpp"
#include "mrsur/mf_models.hpp"
#include "mrsur/point.hpp"
#include "mrsur/rng.hpp"

// Analytic and simulated test problems: the two-level Forrester pair, the
// randomly driven damped harmonic oscillator with an explicit exponential
// Euler scheme, evaluation-cost models, and a sampled-GP toy simulator.

namespace mrsur {

// ---------------------------------------------------------------------------
// Forrester two-level pair on [0, 1]
// ---------------------------------------------------------------------------

inline double forrester_lf(double u) {
  const double t = 6.0 * u - 2.0;
  return 0.5 * t * t * std::sin(12.0 * u - 4.0) + 10.0 * (u - 0.5);
}

inline double forrester_hf(double u) {
  const double t = 6.0 * u - 2.0;
  return t * t * std::sin(12.0 * u - 4.0) + 10.0;
}

// ---------------------------------------------------------------------------
// Random damped harmonic oscillator
// ---------------------------------------------------------------------------

struct OscillatorConfig {
  double omega0 = 1.0;       // resonance frequency, rad/s
  double zeta = 0.1;         // damping ratio
  double delta = 0.01;       // time step, s (the fidelity parameter)
  double t_end = 30.0;       // horizon, s
  double spectral_intensity = 1.0;  // S
  double z_crit = -3.0;

  bool valid() const {
    return omega0 > 0.0 && zeta >= 0.0 && delta > 0.0 && delta <= t_end;
  }
};

namespace detail {

// exp(A delta) for A = [[0, 1], [-w0^2, -2 zeta w0]] in closed form through
// the characteristic roots; the complex, repeated and distinct-real branches
// are all exact, so the homogeneous flow is integrated without error.
inline Eigen::Matrix2d oscillator_flow(double omega0, double zeta, double delta) {
  Eigen::Matrix2d M;
  M << 0.0, delta, -omega0 * omega0 * delta, -2.0 * zeta * omega0 * delta;
  const double s = 0.5 * M.trace();
  const Eigen::Matrix2d N = M - s * Eigen::Matrix2d::Identity();
  const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  const double disc = s * s - det;  // = -det(N) for 2x2 traceless N
  const double es = std::exp(s);
  double c, k;  // e^M = es * (c I + k N)
  if (disc > 1e-16) {
    const double p = std::sqrt(disc);
    c = std::cosh(p);
    k = std::sinh(p) / p;
  } else if (disc < -1e-16) {
    const double b = std::sqrt(-disc);
    c = std::cos(b);
    k = std::sin(b) / b;
  } else {
    c = 1.0;
    k = 1.0;  // repeated root; sinh(p)/p -> 1
  }
  return es * (c * Eigen::Matrix2d::Identity() + k * N);
}

}  // namespace detail

// States (X_k, V_k) at t = 0, delta, ..., K delta with K = floor(t_end/delta).
// Each step injects sqrt(2 pi S delta) U into the velocity and applies the
// exact linear flow.
inline std::vector<Eigen::Vector2d> exp_euler_trajectory(
    const OscillatorConfig& cfg, std::uint64_t seed,
    const Eigen::Vector2d& initial = Eigen::Vector2d::Zero()) {
  if (!cfg.valid()) throw Error("exp_euler_trajectory: invalid config");
  const int K = static_cast<int>(std::floor(cfg.t_end / cfg.delta + 1e-9));
  const Eigen::Matrix2d E = detail::oscillator_flow(cfg.omega0, cfg.zeta, cfg.delta);
  const double noise_scale =
      std::sqrt(2.0 * M_PI * cfg.spectral_intensity * cfg.delta);

  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::Vector2d> traj;
  traj.reserve(K + 1);
  Eigen::Vector2d x = initial;
  traj.push_back(x);
  for (int k = 0; k < K; ++k) {
    x[1] += noise_scale * gauss(rng);
    x = E * x;
    traj.push_back(x);
  }
  return traj;
}

// Z(omega0, zeta, delta) = max_k log |X_k|, zero displacements excluded.
inline double oscillator_response(const OscillatorConfig& cfg, std::uint64_t seed) {
  const std::vector<Eigen::Vector2d> traj = exp_euler_trajectory(cfg, seed);
  double best = -std::numeric_limits<double>::infinity();
  for (const Eigen::Vector2d& s : traj) {
    const double ax = std::fabs(s[0]);
    if (ax > 0.0) best = std::max(best, std::log(ax));
  }
  if (!std::isfinite(best)) {
    throw AllZeroTrajectory("oscillator_response: displacement identically zero");
  }
  return best;
}

// ---------------------------------------------------------------------------
// Evaluation-cost models
// ---------------------------------------------------------------------------

struct CostModel {
  enum class Kind { table, affine };
  Kind kind = Kind::affine;
  std::vector<double> levels;  // table form
  std::vector<double> costs;
  double a = 0.0;  // affine form C(delta) = a/delta + b
  double b = 0.0;

  static CostModel table_model(std::vector<double> levels, std::vector<double> costs) {
    CostModel cm;
    cm.kind = Kind::table;
    cm.levels = std::move(levels);
    cm.costs = std::move(costs);
    return cm;
  }
  static CostModel affine_model(double a, double b) {
    CostModel cm;
    cm.kind = Kind::affine;
    cm.a = a;
    cm.b = b;
    return cm;
  }
};

inline double cost_eval(const CostModel& cm, double delta) {
  if (cm.kind == CostModel::Kind::affine) return cm.a / delta + cm.b;
  return cm.costs[detail::find_level(cm.levels, delta, "cost_eval")];
}

// ---------------------------------------------------------------------------
// Sampled-GP toy simulator
// ---------------------------------------------------------------------------

// The standard toy prior: additive model with m = 0, sigma0 = 1, G = 4, L = 2,
// Matern 5/2 components with lengthscales 0.3 (base) and 0.1 (error).
inline AdditiveModel toy_model() {
  AdditiveModel m;
  m.base = ProductMatern::iso(1.0, 0.3, 1, Matern::nu52);
  m.err_correlation = ProductMatern::iso(1.0, 0.1, 1, Matern::nu52);
  m.error_amplitude = 4.0;
  m.brownian_exponent = 2.0;
  m.mean = 0.0;
  return m;
}

// One sample path of the toy prior on grid_u x levels, plus the Gaussian
// observer.  The simulator is only defined on the grid; queries snap to the
// nearest grid point and the exact level.
struct ToyGpPath {
  std::vector<double> grid_u;
  std::vector<double> levels;
  Eigen::MatrixXd values;  // grid_u.size() x levels.size()
  double noise_sd = 0.4;

  int nearest_u(double u) const {
    int best = 0;
    for (int i = 1; i < static_cast<int>(grid_u.size()); ++i) {
      if (std::fabs(grid_u[i] - u) < std::fabs(grid_u[best] - u)) best = i;
    }
    return best;
  }
  double value(double u, double delta) const {
    const int s = detail::find_level(levels, delta, "ToyGpPath::value");
    return values(nearest_u(u), s);
  }
  double snap_u(double u) const { return grid_u[nearest_u(u)]; }
  double observe(double u, double delta, std::mt19937_64& rng) const {
    std::normal_distribution<double> gauss(0.0, noise_sd);
    return value(u, delta) + gauss(rng);
  }
};

inline ToyGpPath toy_gp_sampler(const AdditiveModel& model,
                                const std::vector<double>& grid_u,
                                const std::vector<double>& levels, double noise_sd,
                                std::uint64_t seed) {
  const int nu = static_cast<int>(grid_u.size());
  const int nl = static_cast<int>(levels.size());
  const int n = nu * nl;
  std::vector<Point> pts;
  pts.reserve(n);
  for (int s = 0; s < nl; ++s) {
    for (int i = 0; i < nu; ++i) pts.push_back(Point::scalar(grid_u[i], levels[s]));
  }
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = additive_cov(model, pts[i], pts[j]);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  const double mdiag = std::max(K.diagonal().mean(), 1e-300);
  double jitter = 1e-12 * mdiag;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  while (llt.info() != Eigen::Success) {
    if (jitter > 1e-4 * mdiag) throw CholeskyFailure("toy_gp_sampler: path covariance");
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    llt.compute(Kj);
    jitter *= 10.0;
  }
  std::mt19937_64 rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd xi(n);
  for (int i = 0; i < n; ++i) xi[i] = gauss(rng);
  const Eigen::VectorXd path = Eigen::MatrixXd(llt.matrixL()) * xi;

  ToyGpPath out;
  out.grid_u = grid_u;
  out.levels = levels;
  out.noise_sd = noise_sd;
  out.values = Eigen::MatrixXd(nu, nl);
  for (int s = 0; s < nl; ++s) {
    for (int i = 0; i < nu; ++i) out.values(i, s) = path[s * nu + i] + model.mean;
  }
  return out;
}

}  // namespace mrsur

#endif  // MRSUR_TESTBEDS_HPP
