#pragma once

#include "cobiveco/mesh.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace cobiveco {

using SparseMat = Eigen::SparseMatrix<double>;

/// P1 per-element gradient operator (3*nTets x nNodes). Row 3e+c holds the
/// c-component of the gradient on element e; exact for affine nodal fields.
SparseMat gradientOperator(const TetMesh& mesh);

/// Reshapes (G * f) into one 3-vector per element.
VectorField applyGradient(const SparseMat& gradient, const ScalarField& field);

/// Linear FEM Laplacian (stiffness matrix with flipped sign): symmetric,
/// zero row sums, negative semi-definite. Equals -G^T W G with W the
/// element-volume weights repeated per component.
SparseMat laplacianOperator(const TetMesh& mesh);

/// Diagonal of element volumes repeated 3x, matching the gradient layout.
Eigen::VectorXd gradientWeights(const TetMesh& mesh);

/// Uniform-grid spatial index over tets for point location.
class PointLocator {
 public:
  explicit PointLocator(const TetMesh& mesh);

  /// Containing tet and barycentric coordinates. Accepts points within
  /// `tolerance` (Euclidean) of a tet; returns -1 if none qualifies.
  int locate(const Vec3& p, Eigen::Vector4d& bary, double tolerance) const;

  /// Tet minimizing the Euclidean outside-distance estimate near p; always
  /// succeeds (search rings grow until candidates appear). Barycentric
  /// coordinates may extrapolate.
  int locateNearest(const Vec3& p, Eigen::Vector4d& bary) const;

  const TetMesh& mesh() const { return *mesh_; }

 private:
  void cellRange(const Vec3& p, int ring, std::vector<int>& tetsOut) const;
  double outsideDistance(int tet, const Vec3& p, Eigen::Vector4d& bary) const;

  const TetMesh* mesh_;
  Vec3 origin_;
  double cell_ = 1.0;
  Eigen::Vector3i dims_;
  std::vector<std::vector<int>> bins_;
};

struct InterpolationOptions {
  /// Euclidean snap tolerance as a multiple of the mesh mean edge length.
  double snapToleranceFactor = 1e-6;
  /// Fall back to the nearest tet (allowing barycentric extrapolation)
  /// instead of failing for points outside every tet.
  bool allowNearest = false;
};

/// Barycentric interpolation matrix (points x nNodes): each row carries the
/// four weights of the containing tet and sums to 1. Throws InputError with
/// the point index if a point lies outside all tets beyond tolerance and
/// allowNearest is off.
SparseMat interpolationMatrix(const TetMesh& mesh, const Points& points,
                              const InterpolationOptions& options = {});
SparseMat interpolationMatrix(const PointLocator& locator, const Points& points,
                              const InterpolationOptions& options = {});

/// Selection matrix (rows.size() x nNodes) extracting the given node values.
SparseMat selectionMatrix(const std::vector<int>& nodeIds, int nNodes);

}  // namespace cobiveco
