#include "cobiveco/operators.hpp"

#include "cobiveco/errors.hpp"
#include "cobiveco/threading.hpp"

#include <algorithm>
#include <cmath>

namespace cobiveco {

namespace {

// Shape-function gradients of a tet: column i of the returned 3x4 block is
// grad(phi_i). Columns sum to zero by construction.
Eigen::Matrix<double, 3, 4> shapeGradients(const TetMesh& mesh, int e) {
  Vec3 x0 = mesh.node(mesh.tets()(e, 0));
  Eigen::Matrix3d jac;
  jac.col(0) = mesh.node(mesh.tets()(e, 1)) - x0;
  jac.col(1) = mesh.node(mesh.tets()(e, 2)) - x0;
  jac.col(2) = mesh.node(mesh.tets()(e, 3)) - x0;
  Eigen::Matrix3d jinv = jac.inverse();
  Eigen::Matrix<double, 3, 4> g;
  g.col(1) = jinv.row(0);
  g.col(2) = jinv.row(1);
  g.col(3) = jinv.row(2);
  g.col(0) = -(g.col(1) + g.col(2) + g.col(3));
  return g;
}

}  // namespace

SparseMat gradientOperator(const TetMesh& mesh) {
  const int m = mesh.nTets();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * 12);
  for (int e = 0; e < m; ++e) {
    Eigen::Matrix<double, 3, 4> g = shapeGradients(mesh, e);
    for (int k = 0; k < 4; ++k) {
      int v = mesh.tets()(e, k);
      for (int c = 0; c < 3; ++c) trips.emplace_back(3 * e + c, v, g(c, k));
    }
  }
  SparseMat grad(3 * m, mesh.nNodes());
  grad.setFromTriplets(trips.begin(), trips.end());
  return grad;
}

VectorField applyGradient(const SparseMat& gradient, const ScalarField& field) {
  Eigen::VectorXd flat = gradient * field;
  const Eigen::Index m = flat.size() / 3;
  VectorField out(m, 3);
  for (Eigen::Index e = 0; e < m; ++e) out.row(e) = flat.segment<3>(3 * e).transpose();
  return out;
}

SparseMat laplacianOperator(const TetMesh& mesh) {
  const int m = mesh.nTets();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * 16);
  for (int e = 0; e < m; ++e) {
    Eigen::Matrix<double, 3, 4> g = shapeGradients(mesh, e);
    double vol = mesh.tetVolumes()(e);
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j) {
        double v = -vol * g.col(i).dot(g.col(j));
        trips.emplace_back(mesh.tets()(e, i), mesh.tets()(e, j), v);
        if (j != i) trips.emplace_back(mesh.tets()(e, j), mesh.tets()(e, i), v);
      }
    }
  }
  SparseMat lap(mesh.nNodes(), mesh.nNodes());
  lap.setFromTriplets(trips.begin(), trips.end());
  return lap;
}

Eigen::VectorXd gradientWeights(const TetMesh& mesh) {
  Eigen::VectorXd w(3 * mesh.nTets());
  for (int e = 0; e < mesh.nTets(); ++e) w.segment<3>(3 * e).setConstant(mesh.tetVolumes()(e));
  return w;
}

PointLocator::PointLocator(const TetMesh& mesh) : mesh_(&mesh) {
  Eigen::AlignedBox3d box = mesh.boundingBox();
  cell_ = std::max(mesh.meanEdgeLength(), 1e-12);
  Vec3 extent = box.sizes();
  for (int c = 0; c < 3; ++c) {
    dims_(c) = std::max(1, static_cast<int>(std::ceil(extent(c) / cell_)) + 1);
    dims_(c) = std::min(dims_(c), 512);
  }
  // recompute cell so the capped grid still covers the box
  cell_ = std::max({extent(0) / dims_(0), extent(1) / dims_(1), extent(2) / dims_(2), cell_});
  origin_ = box.min() - Vec3::Constant(0.5 * cell_);
  bins_.assign(static_cast<std::size_t>(dims_(0)) * dims_(1) * dims_(2), {});

  const double pad = 1e-3 * cell_;
  for (int e = 0; e < mesh.nTets(); ++e) {
    Eigen::AlignedBox3d tb;
    for (int k = 0; k < 4; ++k) tb.extend(Vec3(mesh.node(mesh.tets()(e, k))));
    Eigen::Vector3i lo, hi;
    for (int c = 0; c < 3; ++c) {
      lo(c) = std::clamp(static_cast<int>(std::floor((tb.min()(c) - pad - origin_(c)) / cell_)), 0, dims_(c) - 1);
      hi(c) = std::clamp(static_cast<int>(std::floor((tb.max()(c) + pad - origin_(c)) / cell_)), 0, dims_(c) - 1);
    }
    for (int i = lo(0); i <= hi(0); ++i) {
      for (int j = lo(1); j <= hi(1); ++j) {
        for (int k = lo(2); k <= hi(2); ++k) {
          bins_[static_cast<std::size_t>((i * dims_(1) + j) * dims_(2) + k)].push_back(e);
        }
      }
    }
  }
}

void PointLocator::cellRange(const Vec3& p, int ring, std::vector<int>& tetsOut) const {
  Eigen::Vector3i c;
  for (int d = 0; d < 3; ++d) {
    c(d) = std::clamp(static_cast<int>(std::floor((p(d) - origin_(d)) / cell_)), 0, dims_(d) - 1);
  }
  for (int i = std::max(0, c(0) - ring); i <= std::min(dims_(0) - 1, c(0) + ring); ++i) {
    for (int j = std::max(0, c(1) - ring); j <= std::min(dims_(1) - 1, c(1) + ring); ++j) {
      for (int k = std::max(0, c(2) - ring); k <= std::min(dims_(2) - 1, c(2) + ring); ++k) {
        // only the new shell of the ring
        if (ring > 0 && std::max({std::abs(i - c(0)), std::abs(j - c(1)), std::abs(k - c(2))}) != ring) continue;
        const auto& bin = bins_[static_cast<std::size_t>((i * dims_(1) + j) * dims_(2) + k)];
        tetsOut.insert(tetsOut.end(), bin.begin(), bin.end());
      }
    }
  }
}

double PointLocator::outsideDistance(int tet, const Vec3& p, Eigen::Vector4d& bary) const {
  const TetMesh& mesh = *mesh_;
  Vec3 x0 = mesh.node(mesh.tets()(tet, 0));
  Eigen::Matrix3d jac;
  jac.col(0) = mesh.node(mesh.tets()(tet, 1)) - x0;
  jac.col(1) = mesh.node(mesh.tets()(tet, 2)) - x0;
  jac.col(2) = mesh.node(mesh.tets()(tet, 3)) - x0;
  Vec3 l = jac.partialPivLu().solve(p - x0);
  bary << 1.0 - l.sum(), l(0), l(1), l(2);
  // signed distance below each face plane: -lambda_i * h_i, h_i = 3 V / area_i
  double dist = 0.0;
  Eigen::Matrix<double, 3, 4> g = shapeGradients(mesh, tet);
  for (int i = 0; i < 4; ++i) {
    if (bary(i) < 0) {
      // |grad phi_i| = 1 / h_i
      double h = 1.0 / g.col(i).norm();
      dist = std::max(dist, -bary(i) * h);
    }
  }
  return dist;
}

int PointLocator::locate(const Vec3& p, Eigen::Vector4d& bary, double tolerance) const {
  std::vector<int> cand;
  cellRange(p, 0, cand);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  int best = -1;
  double bestDist = tolerance;
  Eigen::Vector4d b;
  for (int e : cand) {
    double d = outsideDistance(e, p, b);
    if (d < bestDist || (best < 0 && d <= bestDist)) {
      best = e;
      bestDist = d;
      bary = b;
      if (d == 0.0) break;
    }
  }
  return best;
}

int PointLocator::locateNearest(const Vec3& p, Eigen::Vector4d& bary) const {
  const int maxRing = dims_.maxCoeff();
  std::vector<int> cand;
  int foundRing = -1;
  for (int ring = 0; ring <= maxRing; ++ring) {
    cellRange(p, ring, cand);
    if (!cand.empty() && foundRing < 0) foundRing = ring;
    if (foundRing >= 0 && ring >= foundRing + 1) break;  // one extra ring
  }
  if (cand.empty()) throw NumericError("PointLocator: empty mesh grid");
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  int best = -1;
  double bestDist = std::numeric_limits<double>::infinity();
  Eigen::Vector4d b;
  for (int e : cand) {
    double d = outsideDistance(e, p, b);
    if (d < bestDist) {
      best = e;
      bestDist = d;
      bary = b;
      if (d == 0.0) break;
    }
  }
  return best;
}

SparseMat interpolationMatrix(const TetMesh& mesh, const Points& points,
                              const InterpolationOptions& options) {
  PointLocator locator(mesh);
  return interpolationMatrix(locator, points, options);
}

SparseMat interpolationMatrix(const PointLocator& locator, const Points& points,
                              const InterpolationOptions& options) {
  const TetMesh& mesh = locator.mesh();
  const Eigen::Index n = points.rows();
  const double tol = options.snapToleranceFactor * mesh.meanEdgeLength();
  std::vector<std::array<int, 4>> rowNodes(static_cast<std::size_t>(n));
  std::vector<Eigen::Vector4d> rowWeights(static_cast<std::size_t>(n));
  std::vector<int> missing(static_cast<std::size_t>(n), 0);
  threading::parallelFor(n, [&](std::int64_t i) {
    Eigen::Vector4d bary;
    Vec3 p = points.row(i);
    int tet = locator.locate(p, bary, tol);
    if (tet < 0 && options.allowNearest) tet = locator.locateNearest(p, bary);
    if (tet < 0) {
      missing[static_cast<std::size_t>(i)] = 1;
      return;
    }
    for (int k = 0; k < 4; ++k) rowNodes[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = mesh.tets()(tet, k);
    rowWeights[static_cast<std::size_t>(i)] = bary;
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    if (missing[static_cast<std::size_t>(i)]) {
      throw InputError("interpolationMatrix: point " + std::to_string(i) +
                       " lies outside the mesh beyond tolerance");
    }
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector4d& bary = rowWeights[static_cast<std::size_t>(i)];
    int snapped = -1;
    for (int k = 0; k < 4; ++k) {
      if (bary(k) >= 1.0 - 1e-9) snapped = k;
    }
    if (snapped >= 0) {
      // coincides with a mesh node: make the row an exact unit vector
      trips.emplace_back(static_cast<int>(i),
                         rowNodes[static_cast<std::size_t>(i)][static_cast<std::size_t>(snapped)], 1.0);
      continue;
    }
    for (int k = 0; k < 4; ++k) {
      trips.emplace_back(static_cast<int>(i), rowNodes[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                         bary(k));
    }
  }
  SparseMat interp(n, mesh.nNodes());
  interp.setFromTriplets(trips.begin(), trips.end());
  return interp;
}

SparseMat selectionMatrix(const std::vector<int>& nodeIds, int nNodes) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nodeIds.size());
  for (std::size_t r = 0; r < nodeIds.size(); ++r) {
    trips.emplace_back(static_cast<int>(r), nodeIds[r], 1.0);
  }
  SparseMat sel(static_cast<Eigen::Index>(nodeIds.size()), nNodes);
  sel.setFromTriplets(trips.begin(), trips.end());
  return sel;
}

}  // namespace cobiveco
