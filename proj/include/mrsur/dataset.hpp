#ifndef MRSUR_DATASET_HPP
#define MRSUR_DATASET_HPP

#include <Eigen/Core>
#include <vector>

#include "mrsur/point.hpp"

namespace mrsur {

// Ordered simulation results plus the accumulated evaluation cost.
struct Dataset {
  std::vector<Point> points;
  std::vector<double> responses;
  double total_cost = 0.0;

  int size() const { return static_cast<int>(points.size()); }
  void add(Point p, double z, double cost) {
    points.push_back(std::move(p));
    responses.push_back(z);
    total_cost += cost;
  }
  Eigen::VectorXd response_vector() const {
    return Eigen::Map<const Eigen::VectorXd>(responses.data(),
                                             static_cast<Eigen::Index>(responses.size()));
  }
};

}  // namespace mrsur

#endif  // MRSUR_DATASET_HPP
