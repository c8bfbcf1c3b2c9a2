#ifndef MRSUR_POINT_HPP
#define MRSUR_POINT_HPP

#include <Eigen/Core>
#include <cmath>
#include <vector>

namespace mrsur {

// A simulator input: design/environmental coordinates u plus the fidelity
// parameter delta (mesh size, time step, or a level value).
struct Point {
  Eigen::VectorXd u;
  double delta = 0.0;

  Point() = default;
  Point(Eigen::VectorXd u_, double delta_) : u(std::move(u_)), delta(delta_) {}
  static Point scalar(double u_, double delta_ = 0.0) {
    Eigen::VectorXd v(1);
    v[0] = u_;
    return Point(std::move(v), delta_);
  }
  Eigen::Index dim() const { return u.size(); }
};

// Total order on points: u coordinates first, then delta.  Used only for
// deterministic tie-breaking.
inline bool point_less(const Point& a, const Point& b) {
  const Eigen::Index n = std::min(a.u.size(), b.u.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.u[i] < b.u[i]) return true;
    if (a.u[i] > b.u[i]) return false;
  }
  if (a.u.size() != b.u.size()) return a.u.size() < b.u.size();
  return a.delta < b.delta;
}

inline bool batch_less(const std::vector<Point>& a, const std::vector<Point>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (point_less(a[i], b[i])) return true;
    if (point_less(b[i], a[i])) return false;
  }
  return a.size() < b.size();
}

// Axis-aligned box domain for the u coordinates.
struct Box {
  Eigen::VectorXd lo, hi;

  Box() = default;
  Box(Eigen::VectorXd lo_, Eigen::VectorXd hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {}
  static Box unit(Eigen::Index dim) {
    return Box(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
  }
  Eigen::Index dim() const { return lo.size(); }

  // Affine image of a unit-cube coordinate.
  Eigen::VectorXd from_unit(const Eigen::VectorXd& t) const {
    return lo.array() + (hi - lo).array() * t.array();
  }
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.array().max(lo.array()).min(hi.array());
  }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    return (x.array() >= lo.array() - tol).all() && (x.array() <= hi.array() + tol).all();
  }
};

}  // namespace mrsur

#endif  // MRSUR_POINT_HPP
