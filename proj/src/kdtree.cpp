#include "cobiveco/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cobiveco {

KdTree::KdTree(const Eigen::MatrixXd& points) : points_(points) {
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) {
    nodes_.reserve(order_.size() * 2);
    root_ = build(0, static_cast<int>(order_.size()), 0);
  }
}

int KdTree::build(int begin, int end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= 8) {
    node.pointIndex = -2;  // leaf marker
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  // split along the widest dimension of this subset
  const int dims = static_cast<int>(points_.cols());
  int splitDim = depth % dims;
  double widest = -1.0;
  for (int d = 0; d < dims; ++d) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = begin; i < end; ++i) {
      double v = points_(order_[static_cast<std::size_t>(i)], d);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      splitDim = d;
    }
  }
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     double va = points_(a, splitDim), vb = points_(b, splitDim);
                     return va < vb || (va == vb && a < b);
                   });
  node.splitDim = splitDim;
  node.splitValue = points_(order_[static_cast<std::size_t>(mid)], splitDim);
  int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  int left = build(begin, mid, depth + 1);
  int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(self)].left = left;
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

void KdTree::nearestImpl(int nodeId, const Eigen::VectorXd& query, double& bestDist,
                         int& bestIndex) const {
  const Node& node = nodes_[static_cast<std::size_t>(nodeId)];
  if (node.pointIndex == -2) {
    for (int i = node.begin; i < node.end; ++i) {
      int p = order_[static_cast<std::size_t>(i)];
      double d = (points_.row(p).transpose() - query).squaredNorm();
      if (d < bestDist || (d == bestDist && p < bestIndex)) {
        bestDist = d;
        bestIndex = p;
      }
    }
    return;
  }
  double delta = query(node.splitDim) - node.splitValue;
  int near = delta <= 0 ? node.left : node.right;
  int far = delta <= 0 ? node.right : node.left;
  nearestImpl(near, query, bestDist, bestIndex);
  if (delta * delta <= bestDist) nearestImpl(far, query, bestDist, bestIndex);
}

int KdTree::nearest(const Eigen::VectorXd& query) const {
  if (root_ < 0) return -1;
  double bestDist = std::numeric_limits<double>::infinity();
  int bestIndex = size();
  nearestImpl(root_, query, bestDist, bestIndex);
  return bestIndex < size() ? bestIndex : -1;
}

void KdTree::radiusImpl(int nodeId, const Eigen::VectorXd& query, double radius,
                        std::vector<int>& out) const {
  const Node& node = nodes_[static_cast<std::size_t>(nodeId)];
  if (node.pointIndex == -2) {
    double r2 = radius * radius;
    for (int i = node.begin; i < node.end; ++i) {
      int p = order_[static_cast<std::size_t>(i)];
      if ((points_.row(p).transpose() - query).squaredNorm() <= r2) out.push_back(p);
    }
    return;
  }
  double delta = query(node.splitDim) - node.splitValue;
  if (delta <= radius) radiusImpl(node.left, query, radius, out);
  if (-delta <= radius) radiusImpl(node.right, query, radius, out);
}

std::vector<int> KdTree::radiusSearch(const Eigen::VectorXd& query, double radius) const {
  std::vector<int> out;
  if (root_ >= 0) radiusImpl(root_, query, radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cobiveco
