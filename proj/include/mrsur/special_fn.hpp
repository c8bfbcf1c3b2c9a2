#ifndef MRSUR_SPECIAL_FN_HPP
#define MRSUR_SPECIAL_FN_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrsur/errors.hpp"

// Univariate and bivariate standard normal cdfs.  The bivariate cdf follows
// Genz (2004), "Numerical computation of rectangular bivariate and trivariate
// normal and t probabilities": Drezner-Wesolowsky angular quadrature for
// |rho| < 0.925 and a tail-corrected expansion above.  Absolute accuracy is
// of the order of 5e-16, well inside what the integrated criteria need.

namespace mrsur {

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// Phi(x); saturates to exactly 0/1 in the far tails.
inline double normal_cdf(double x) {
  static const double inv_sqrt2 = 0.7071067811865475244008444;
  return 0.5 * std::erfc(-x * inv_sqrt2);
}

struct BvnQuery {
  double a = 0.0;
  double b = 0.0;
  double rho = 0.0;  // correlation, in [-1, 1]
};

namespace detail {

// Gauss-Legendre half-rules (positive abscissae) on [-1, 1].
inline constexpr double kGlW6[3] = {0.1713244923791705, 0.3607615730481384,
                                    0.4679139345726904};
inline constexpr double kGlX6[3] = {0.9324695142031522, 0.6612093864662647,
                                    0.2386191860831970};
inline constexpr double kGlW12[6] = {0.04717533638651177, 0.1069393259953183,
                                     0.1600783285433464,  0.2031674267230659,
                                     0.2334925365383547,  0.2491470458134029};
inline constexpr double kGlX12[6] = {0.9815606342467191, 0.9041172563704750,
                                     0.7699026741943050, 0.5873179542866171,
                                     0.3678314989981802, 0.1252334085114692};
inline constexpr double kGlW20[10] = {0.01761400713915212, 0.04060142980038694,
                                      0.06267204833410906, 0.08327674157670475,
                                      0.1019301198172404,  0.1181945319615184,
                                      0.1316886384491766,  0.1420961093183821,
                                      0.1491729864726037,  0.1527533871307259};
inline constexpr double kGlX20[10] = {0.9931285991850949,  0.9639719272779138,
                                      0.9122344282513259,  0.8391169718222188,
                                      0.7463319064601508,  0.6360536807265150,
                                      0.5108670019508271,  0.3737060887154196,
                                      0.2277858511416451,  0.07652652113349733};

// Upper-orthant probability P(X > h, Y > k) for standard bivariate normal
// with correlation r.
inline double bvn_upper(double h, double k, double r) {
  static const double two_pi = 6.283185307179586476925287;

  const double* w;
  const double* x;
  int ng;
  const double ar = std::fabs(r);
  if (ar < 0.3) {
    ng = 3;
    w = kGlW6;
    x = kGlX6;
  } else if (ar < 0.75) {
    ng = 6;
    w = kGlW12;
    x = kGlX12;
  } else {
    ng = 10;
    w = kGlW20;
    x = kGlX20;
  }

  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = std::asin(r);
    for (int i = 0; i < ng; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        const double sn = std::sin(0.5 * asr * (is * x[i] + 1.0));
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (2.0 * two_pi) + normal_cdf(-h) * normal_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
      }
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(two_pi) * normal_cdf(-b / a);
        bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a *= 0.5;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double xs = a * (is * x[i] + 1.0) * a * (is * x[i] + 1.0);
          const double rs = std::sqrt(1.0 - xs);
          asr = -0.5 * (bs / xs + hk);
          if (asr > -100.0) {
            const double sp = 1.0 + c * xs * (1.0 + d * xs);
            const double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
            bvn += a * w[i] * std::exp(asr) * (ep - sp);
          }
        }
      }
      bvn = -bvn / two_pi;
    }
    if (r > 0.0) {
      bvn += normal_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += normal_cdf(k) - normal_cdf(h);
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace detail

// P(X <= a, Y <= b) for standard bivariate normal with correlation rho.
inline double bvn_cdf(double a, double b, double rho) {
  if (std::isnan(a) || std::isnan(b) || std::isnan(rho)) {
    throw DegenerateVariance("bvn_cdf: NaN argument");
  }
  rho = std::clamp(rho, -1.0, 1.0);
  // Degenerate correlations first: Y = X and Y = -X almost surely.
  if (rho == 1.0) return normal_cdf(std::min(a, b));
  if (rho == -1.0) return std::max(0.0, normal_cdf(a) + normal_cdf(b) - 1.0);
  if (std::isinf(a) || std::isinf(b)) {
    if (a < 0.0 || b < 0.0) return 0.0;  // one argument is -inf
    if (std::isinf(a) && std::isinf(b)) return 1.0;
    return std::isinf(a) ? normal_cdf(b) : normal_cdf(a);
  }
  if (rho == 0.0) return normal_cdf(a) * normal_cdf(b);
  return detail::bvn_upper(-a, -b, rho);
}

inline double bvn_cdf(const BvnQuery& q) { return bvn_cdf(q.a, q.b, q.rho); }

}  // namespace mrsur

#endif  // MRSUR_SPECIAL_FN_HPP
