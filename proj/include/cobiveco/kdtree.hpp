#pragma once

#include <Eigen/Dense>

#include <vector>

namespace cobiveco {

/// Exact k-d tree over row-vector points of fixed (runtime) dimension.
/// Deterministic construction and queries; nearest-neighbor ties resolve to
/// the smallest point index.
class KdTree {
 public:
  explicit KdTree(const Eigen::MatrixXd& points);

  int size() const { return static_cast<int>(points_.rows()); }

  /// Index of the nearest point, -1 for an empty tree.
  int nearest(const Eigen::VectorXd& query) const;

  /// Indices of all points within radius (inclusive), sorted ascending.
  std::vector<int> radiusSearch(const Eigen::VectorXd& query, double radius) const;

 private:
  struct Node {
    int splitDim = -1;
    double splitValue = 0.0;
    int pointIndex = -1;  // leaf payload
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range in order_
  };

  int build(int begin, int end, int depth);
  void nearestImpl(int node, const Eigen::VectorXd& query, double& bestDist, int& bestIndex) const;
  void radiusImpl(int node, const Eigen::VectorXd& query, double radius, std::vector<int>& out) const;

  Eigen::MatrixXd points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace cobiveco
