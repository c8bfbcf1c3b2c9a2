#ifndef MRSUR_DESIGN_HPP
#define MRSUR_DESIGN_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "mrsur/errors.hpp"
#include "mrsur/point.hpp"
#include "mrsur/rng.hpp"

// Nested Latin hypercube designs built by successive stratified subsampling
// (Qian 2009 style): the smallest, highest-fidelity level is drawn as a plain
// LHS, then each lower-fidelity level is grown by filling the strata its
// nested points leave unoccupied.  Requires n_s to be a multiple of n_{s+1}.

namespace mrsur {

// Level s (1-based) of the design is the first sizes[s-1] entries of points;
// the containment P_S c P_{S-1} c ... c P_1 is exact by construction.
struct NestedDesign {
  int dim = 0;
  std::vector<int> sizes;               // n_1 >= n_2 >= ... >= n_S
  std::vector<Eigen::VectorXd> points;  // n_1 points in the unit cube

  int num_levels() const { return static_cast<int>(sizes.size()); }
  int level_size(int s) const { return sizes[s - 1]; }
  std::vector<Eigen::VectorXd> level_points(int s) const {
    return {points.begin(), points.begin() + sizes[s - 1]};
  }
};

namespace detail {

// Uniform draw in (eps, 1-eps) so stratum membership is stable under floor.
inline double stratum_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double eps = 1e-12;
  return eps + (1.0 - 2.0 * eps) * unif(rng);
}

}  // namespace detail

inline NestedDesign nlhs(const std::vector<int>& sizes, int dim, std::uint64_t seed) {
  const int S = static_cast<int>(sizes.size());
  if (S == 0 || dim <= 0) throw InvalidSizes("nlhs: empty size profile or dim <= 0");
  for (int s = 0; s < S; ++s) {
    if (sizes[s] <= 0) throw InvalidSizes("nlhs: sizes must be positive");
  }
  for (int s = 0; s + 1 < S; ++s) {
    if (sizes[s] < sizes[s + 1]) throw InvalidSizes("nlhs: sizes must be nonincreasing");
    if (sizes[s] % sizes[s + 1] != 0) {
      throw InvalidSizes("nlhs: each size must be a multiple of the next");
    }
  }

  std::mt19937_64 rng = make_rng(seed);
  NestedDesign d;
  d.dim = dim;
  d.sizes = sizes;
  d.points.assign(sizes[0], Eigen::VectorXd::Zero(dim));

  // Highest-fidelity level: plain LHS of size n_S.
  const int nS = sizes[S - 1];
  for (int j = 0; j < dim; ++j) {
    std::vector<int> perm(nS);
    for (int i = 0; i < nS; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < nS; ++i) {
      d.points[i][j] = (perm[i] + detail::stratum_uniform(rng)) / nS;
    }
  }

  // Expand downward: level s gains n_s - n_{s+1} points in the strata the
  // existing points leave free, coordinate by coordinate.
  for (int s = S - 2; s >= 0; --s) {
    const int n_new = sizes[s];
    const int n_old = sizes[s + 1];
    for (int j = 0; j < dim; ++j) {
      std::vector<char> occupied(n_new, 0);
      for (int i = 0; i < n_old; ++i) {
        occupied[static_cast<int>(d.points[i][j] * n_new)] = 1;
      }
      std::vector<int> free_strata;
      free_strata.reserve(n_new - n_old);
      for (int k = 0; k < n_new; ++k) {
        if (!occupied[k]) free_strata.push_back(k);
      }
      std::shuffle(free_strata.begin(), free_strata.end(), rng);
      for (int i = n_old; i < n_new; ++i) {
        d.points[i][j] = (free_strata[i - n_old] + detail::stratum_uniform(rng)) / n_new;
      }
    }
  }
  return d;
}

// Exact verification helpers (also used by the test suite).
inline bool check_nesting(const NestedDesign& d) {
  // Containment is the prefix property; verify sizes are coherent.
  for (int s = 1; s < d.num_levels(); ++s) {
    if (d.sizes[s] > d.sizes[s - 1]) return false;
  }
  return static_cast<int>(d.points.size()) == d.sizes[0];
}

inline bool check_lhs_per_level(const NestedDesign& d) {
  for (int s = 1; s <= d.num_levels(); ++s) {
    const int n = d.level_size(s);
    for (int j = 0; j < d.dim; ++j) {
      std::vector<char> seen(n, 0);
      for (int i = 0; i < n; ++i) {
        const double x = d.points[i][j];
        if (!(x > 0.0 && x < 1.0)) return false;
        const int stratum = static_cast<int>(x * n);
        if (stratum < 0 || stratum >= n || seen[stratum]) return false;
        seen[stratum] = 1;
      }
    }
  }
  return true;
}

// Affine image of a unit-cube design in an arbitrary box.
inline std::vector<Eigen::VectorXd> scale_to_box(const std::vector<Eigen::VectorXd>& pts,
                                                 const Box& box) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(box.from_unit(p));
  return out;
}

// One row per (level, point) membership; deltas maps level s to its fidelity
// value.
inline void to_csv(const NestedDesign& d, const std::vector<double>& deltas,
                   std::ostream& os) {
  os << "level,delta";
  for (int j = 1; j <= d.dim; ++j) os << ",u" << j;
  os << "\n";
  os.precision(17);
  for (int s = 1; s <= d.num_levels(); ++s) {
    for (int i = 0; i < d.level_size(s); ++i) {
      os << s << "," << deltas[s - 1];
      for (int j = 0; j < d.dim; ++j) os << "," << d.points[i][j];
      os << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Maximin improvement
// ---------------------------------------------------------------------------

namespace detail {

inline double level_min_dist(const std::vector<Eigen::VectorXd>& pts, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      best = std::min(best, (pts[i] - pts[j]).norm());
    }
  }
  return best;
}

// Top level containing point index idx (levels are prefixes).
inline int band_of(const std::vector<int>& sizes, int idx) {
  int band = 1;
  for (int s = 0; s < static_cast<int>(sizes.size()); ++s) {
    if (idx < sizes[s]) band = s + 1;
  }
  return band;
}

}  // namespace detail

// Greedy maximin polish: within-stratum coordinate redraws plus coordinate
// swaps between points sharing the same top level (both move types preserve
// the nesting and the per-level stratification exactly).  A move is accepted
// only if no level's minimum pairwise distance decreases and at least one
// increases, so the per-level minimum distance is nondecreasing versus the
// input design.
inline NestedDesign maximin_improve(const NestedDesign& input, int iters,
                                    std::uint64_t seed) {
  NestedDesign d = input;
  const int S = d.num_levels();
  const int n1 = d.sizes[0];
  if (n1 < 2 || iters <= 0) return d;

  std::mt19937_64 rng = make_rng(seed);
  std::uniform_int_distribution<int> pick_point(0, n1 - 1);
  std::uniform_int_distribution<int> pick_dim(0, d.dim - 1);
  std::uniform_int_distribution<int> pick_move(0, 1);

  std::vector<double> min_dist(S);
  for (int s = 0; s < S; ++s) min_dist[s] = detail::level_min_dist(d.points, d.sizes[s]);

  auto affected_levels = [&](int idx) {
    // Point idx lives in levels 1..band_of(idx); those with >= 2 points matter.
    std::vector<int> out;
    const int band = detail::band_of(d.sizes, idx);
    for (int s = 1; s <= band; ++s) {
      if (d.sizes[s - 1] >= 2) out.push_back(s);
    }
    return out;
  };

  for (int it = 0; it < iters; ++it) {
    const int move = pick_move(rng);
    const int j = pick_dim(rng);
    int i1 = pick_point(rng);
    int i2 = -1;
    double old1 = d.points[i1][j], old2 = 0.0;

    if (move == 0) {
      // Redraw within the finest stratum of coordinate j.
      const int stratum = static_cast<int>(old1 * n1);
      d.points[i1][j] = (stratum + detail::stratum_uniform(rng)) / n1;
    } else {
      i2 = pick_point(rng);
      if (i2 == i1 ||
          detail::band_of(d.sizes, i1) != detail::band_of(d.sizes, i2)) {
        continue;  // swap only within the same top-level band
      }
      old2 = d.points[i2][j];
      std::swap(d.points[i1][j], d.points[i2][j]);
    }

    std::vector<int> levels = affected_levels(i1);
    bool ok = true, strict = false;
    std::vector<double> upd(levels.size());
    for (std::size_t t = 0; t < levels.size(); ++t) {
      const int s = levels[t];
      upd[t] = detail::level_min_dist(d.points, d.sizes[s - 1]);
      if (upd[t] < min_dist[s - 1]) ok = false;
      if (upd[t] > min_dist[s - 1]) strict = true;
    }
    if (ok && strict) {
      for (std::size_t t = 0; t < levels.size(); ++t) min_dist[levels[t] - 1] = upd[t];
    } else {
      d.points[i1][j] = old1;
      if (i2 >= 0) d.points[i2][j] = old2;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Grid + local optimization of a sampling criterion
// ---------------------------------------------------------------------------

struct GridSpec {
  Box u_box;
  int points_per_dim = 21;
  std::vector<double> levels;  // fidelity values, enumerated in this order
};

namespace detail {

inline double grid_coord(const Box& box, int j, int i, int P) {
  if (P <= 1) return 0.5 * (box.lo[j] + box.hi[j]);
  return box.lo[j] + (box.hi[j] - box.lo[j]) * (static_cast<double>(i) / (P - 1));
}

}  // namespace detail

// Generic monotone coordinate search (maximization); accepts only strict
// improvements, shrinks all steps in half when a full sweep fails, stops
// after `halvings` shrinks or `max_evals` objective evaluations.
inline Eigen::VectorXd coordinate_maximize(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    Eigen::VectorXd steps, int halvings, int max_evals, const Box* box = nullptr,
    double* best_value = nullptr) {
  double fx = f(x);
  int evals = 1;
  for (int h = 0; h <= halvings && evals < max_evals; ++h) {
    bool any = true;
    while (any && evals < max_evals) {
      any = false;
      for (Eigen::Index j = 0; j < x.size() && evals < max_evals; ++j) {
        for (int dir = -1; dir <= 1; dir += 2) {
          Eigen::VectorXd y = x;
          y[j] += dir * steps[j];
          if (box) y = box->clamp(y);
          const double fy = f(y);
          ++evals;
          if (fy > fx) {
            x = y;
            fx = fy;
            any = true;
          }
        }
      }
    }
    steps *= 0.5;
  }
  if (best_value) *best_value = fx;
  return x;
}

// Exhaustive regular-grid search over U x levels followed by a local
// coordinate refinement of u at the best point's fixed level.  The returned
// objective value is never below the best grid value.
inline Point optimize_criterion(const std::function<double(const Point&)>& f,
                                const GridSpec& grid, int local_halvings) {
  if (grid.levels.empty() || grid.points_per_dim < 1) {
    throw Error("optimize_criterion: empty grid");
  }
  const int dim = static_cast<int>(grid.u_box.dim());
  const int P = grid.points_per_dim;
  Point best;
  double best_val = -std::numeric_limits<double>::infinity();
  // Row-major odometer, first coordinate slowest; levels outermost.
  for (double level : grid.levels) {
    std::vector<int> idx(dim, 0);
    while (true) {
      Point p;
      p.delta = level;
      p.u.resize(dim);
      for (int j = 0; j < dim; ++j) p.u[j] = detail::grid_coord(grid.u_box, j, idx[j], P);
      const double v = f(p);
      if (v > best_val) {
        best_val = v;
        best = p;
      }
      int j = dim - 1;
      while (j >= 0 && ++idx[j] == P) idx[j--] = 0;
      if (j < 0) break;
    }
  }
  if (local_halvings <= 0) return best;

  Eigen::VectorXd steps(dim);
  for (int j = 0; j < dim; ++j) {
    steps[j] = (P > 1) ? (grid.u_box.hi[j] - grid.u_box.lo[j]) / (P - 1)
                       : 0.5 * (grid.u_box.hi[j] - grid.u_box.lo[j]);
  }
  const double fixed_level = best.delta;
  auto fu = [&](const Eigen::VectorXd& u) { return f(Point(u, fixed_level)); };
  double refined_val = best_val;
  Eigen::VectorXd u = coordinate_maximize(fu, best.u, steps, local_halvings,
                                          200 * dim * (local_halvings + 1), &grid.u_box,
                                          &refined_val);
  if (refined_val >= best_val) best = Point(u, fixed_level);
  return best;
}

}  // namespace mrsur

#endif  // MRSUR_DESIGN_HPP
