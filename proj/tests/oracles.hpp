#ifndef MRSUR_TESTS_ORACLES_HPP
#define MRSUR_TESTS_ORACLES_HPP

// Test-only reference implementations, kept independent of the library code
// paths they are used to check.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace oracles {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
inline void gauleg(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

// erf by Maclaurin series in long double; plenty for |z| <= 3.
inline long double erf_series(long double z) {
  const long double two_over_sqrt_pi = 1.1283791670955125738961589L;
  long double term = z, sum = z;
  for (int n = 1; n < 200; ++n) {
    term *= -z * z / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs((double)add) < 1e-22L * std::fabs((double)sum)) break;
  }
  return two_over_sqrt_pi * sum;
}

inline double normal_cdf_series(double x) {
  return 0.5 + 0.5 * static_cast<double>(erf_series(x / std::sqrt(2.0L)));
}

inline double phi(double x) {
  return 0.3989422804014326779399461 * std::exp(-0.5 * x * x);
}

// P(X <= a, Y <= b) for the standard bivariate normal, by adaptive nested
// Gauss-Legendre quadrature of the joint density over [-8, 8]^2.  The inner
// variable is standardized (y = rho x + sqrt(1-rho^2) t) so the panels stay
// well conditioned at high |rho|; panel counts double until two successive
// estimates agree below 1e-13.
inline double bvn_quadrature(double a, double b, double rho) {
  if (rho >= 1.0) return 0.5 * std::erfc(-std::min(a, b) / std::sqrt(2.0));
  if (rho <= -1.0) {
    const double pa = 0.5 * std::erfc(-a / std::sqrt(2.0));
    const double pb = 0.5 * std::erfc(-b / std::sqrt(2.0));
    return std::max(0.0, pa + pb - 1.0);
  }
  const double xa = std::min(a, 8.0);
  const double xb = std::min(b, 8.0);
  if (xa <= -8.0 || xb <= -8.0) return 0.0;
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));

  static std::vector<double> gx, gw;
  if (gx.empty()) gauleg(16, gx, gw);

  auto inner = [&](double x, int panels) {
    const double tlo = std::max((-8.0 - rho * x) / s, -8.5);
    const double thi = std::min((xb - rho * x) / s, 8.5);
    if (thi <= tlo) return 0.0;
    const double h = (thi - tlo) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double c = tlo + h * (p + 0.5);
      for (std::size_t k = 0; k < gx.size(); ++k) {
        const double t = c + 0.5 * h * gx[k];
        sum += gw[k] * phi(t);
      }
    }
    return phi(x) * sum * 0.5 * h;
  };
  auto estimate = [&](int panels) {
    const double lo = -8.0;
    const double h = (xa - lo) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double c = lo + h * (p + 0.5);
      for (std::size_t k = 0; k < gx.size(); ++k) {
        const double x = c + 0.5 * h * gx[k];
        sum += gw[k] * inner(x, panels);
      }
    }
    return sum * 0.5 * h;
  };

  double prev = estimate(4);
  for (int panels = 8; panels <= 512; panels *= 2) {
    const double cur = estimate(panels);
    if (std::fabs(cur - prev) < 1e-13) return cur;
    prev = cur;
  }
  return prev;
}

// Quadratic-time dominance filter for (cost, J) records.
inline std::vector<int> pareto_bruteforce(const std::vector<std::pair<double, double>>& cj) {
  std::vector<int> front;
  const int n = static_cast<int>(cj.size());
  for (int i = 0; i < n; ++i) {
    bool dominated = false;
    for (int j = 0; j < n && !dominated; ++j) {
      if (j == i) continue;
      if (cj[j].first <= cj[i].first && cj[j].second <= cj[i].second &&
          (cj[j].first < cj[i].first || cj[j].second < cj[i].second)) {
        dominated = true;
      }
    }
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end(), [&](int x, int y) {
    if (cj[x].first != cj[y].first) return cj[x].first < cj[y].first;
    return x < y;
  });
  return front;
}

// Free damped oscillation from (1, 0): x(t) = e^{-z w t}(cos(wd t) + (z w / wd) sin(wd t)).
inline double damped_oscillation(double omega0, double zeta, double t) {
  if (zeta < 1.0) {
    const double wd = omega0 * std::sqrt(1.0 - zeta * zeta);
    return std::exp(-zeta * omega0 * t) *
           (std::cos(wd * t) + (zeta * omega0 / wd) * std::sin(wd * t));
  }
  if (zeta == 1.0) {
    return std::exp(-omega0 * t) * (1.0 + omega0 * t);
  }
  const double wd = omega0 * std::sqrt(zeta * zeta - 1.0);
  return std::exp(-zeta * omega0 * t) *
         (std::cosh(wd * t) + (zeta * omega0 / wd) * std::sinh(wd * t));
}

}  // namespace oracles

#endif  // MRSUR_TESTS_ORACLES_HPP
