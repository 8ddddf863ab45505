#pragma once

#include "cobiveco/mesh.hpp"
#include "cobiveco/operators.hpp"

#include <utility>
#include <vector>

namespace cobiveco {

/// Dirichlet boundary conditions: (node set, value) pairs. Node sets must be
/// pairwise disjoint (resolve rim conflicts before constructing) and at
/// least one must be nonempty.
class DirichletSpec {
 public:
  DirichletSpec(std::vector<std::pair<std::vector<int>, double>> sets, int nNodes);

  const std::vector<std::pair<std::vector<int>, double>>& sets() const { return sets_; }
  const std::vector<int>& nodeMask() const { return mask_; }  // -1 free, else index into sets()
  double minValue() const { return minValue_; }
  double maxValue() const { return maxValue_; }

 private:
  std::vector<std::pair<std::vector<int>, double>> sets_;
  std::vector<int> mask_;
  double minValue_ = 0.0;
  double maxValue_ = 0.0;
};

/// Removes from `nodes` every id contained in `removed` (rim resolution).
std::vector<int> subtractNodes(std::vector<int> nodes, const std::vector<int>& removed);

/// Discrete harmonic solve: L u = 0 on free nodes with the given Dirichlet
/// values; zero Neumann is implied on the unconstrained boundary. The
/// solution is clamped to the Dirichlet value range (the overshoot removed
/// this way is at roundoff level on well-shaped meshes). `relResidual`
/// receives the relative residual of the reduced system.
ScalarField solveLaplace(const TetMesh& mesh, const SparseMat& laplacian, const DirichletSpec& bc,
                         double* relResidual = nullptr);
ScalarField solveLaplace(const TetMesh& mesh, const DirichletSpec& bc,
                         double* relResidual = nullptr);

/// Per-element gradient normalized to unit length. Elements whose gradient
/// norm falls below 1e-12 * fieldRange / meanEdge take the renormalized
/// average of their face neighbors' unit vectors (one pass); if that is also
/// degenerate they fall back to (1,0,0). `fallbackCount` reports how many
/// elements needed the neighbor fallback.
VectorField normalizedGradient(const TetMesh& mesh, const SparseMat& gradient,
                               const ScalarField& field, int* fallbackCount = nullptr);

/// Unit-normalizes an arbitrary per-element field with the same fallback
/// rules; `scale` is the norm threshold below which vectors are degenerate.
VectorField normalizeVectorField(const TetMesh& mesh, const VectorField& raw, double scale,
                                 int* fallbackCount = nullptr);

/// Least-squares trajectory distance: minimizes the volume-weighted residual
/// of sign * (grad d) . t = 1 per element subject to d = 0 on the seeds.
/// `relResidual` receives the relative normal-equations residual.
ScalarField solveTrajectoryDistance(const TetMesh& mesh, const SparseMat& gradient,
                                    const VectorField& tangent, const std::vector<int>& seeds,
                                    int sign, double* relResidual = nullptr);

/// dFrom / (dFrom + dTo), clamped to [0,1]. Nodes whose denominator is below
/// 1e-12 * meanEdge inherit the value of their nearest valid graph neighbor.
ScalarField relativeDistance(const TetMesh& mesh, const ScalarField& dFrom, const ScalarField& dTo);

/// Poisson pair: solves lap p1 = div t with p1 = 0 on seedsFrom and
/// lap p2 = -div t with p2 = 0 on seedsTo, with the weak-form divergence
/// G^T W t. Comparison method only.
std::pair<ScalarField, ScalarField> solvePoissonPair(const TetMesh& mesh, const SparseMat& gradient,
                                                     const SparseMat& laplacian,
                                                     const VectorField& tangent,
                                                     const std::vector<int>& seedsFrom,
                                                     const std::vector<int>& seedsTo);

/// Graph-geodesic distance from the seed set (Dijkstra on the tet edge
/// graph). Comparison method only; throws if any node is unreachable.
ScalarField eikonalDistance(const TetMesh& mesh, const std::vector<int>& seeds);

/// RK2 streamline of a per-element direction field, step until the curve
/// leaves the mesh or maxSteps is reached.
Points traceStreamline(const PointLocator& locator, const VectorField& directions,
                       const Vec3& start, double step, int maxSteps);

}  // namespace cobiveco
