#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace cobiveco {

using Vec3 = Eigen::Vector3d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Tets = Eigen::Matrix<int, Eigen::Dynamic, 4>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3>;

/// Per-node scalar values (one entry per mesh node).
using ScalarField = Eigen::VectorXd;
/// Per-element 3-vectors (one row per tetrahedron).
using VectorField = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Class tag of a boundary face.
enum class SurfaceLabel : std::uint8_t { None = 0, Base = 1, Epi = 2, Lv = 3, Rv = 4 };

const char* surfaceLabelName(SurfaceLabel label);
SurfaceLabel surfaceLabelFromInt(int value);

struct BoundaryFace {
  std::array<int, 3> nodes;  // ordered so the triangle normal points out of the volume
  int tet = -1;
  SurfaceLabel label = SurfaceLabel::None;
};

struct SurfaceMesh;
struct Curve;

/// Immutable tetrahedral mesh with labeled boundary faces.
///
/// Construction validates node indices, enforces positive tet orientation
/// (swapping two vertices where needed), rejects degenerate elements
/// (volume below 1e-12 * meanEdgeLength^3) and identifies the boundary as
/// the set of faces incident to exactly one tet.
class TetMesh {
 public:
  TetMesh(Points nodes, Tets tets);

  /// Same, with labels assigned to boundary faces by their (unordered) node
  /// triple. Triples that do not match a boundary face are an error;
  /// unmatched boundary faces keep the label None.
  TetMesh(Points nodes, Tets tets,
          const std::vector<std::pair<std::array<int, 3>, SurfaceLabel>>& faceLabels);

  /// Copy of `other` with the given face labels applied (skips revalidation).
  TetMesh(const TetMesh& other,
          const std::vector<std::pair<std::array<int, 3>, SurfaceLabel>>& faceLabels);

  int nNodes() const { return static_cast<int>(nodes_.rows()); }
  int nTets() const { return static_cast<int>(tets_.rows()); }

  const Points& nodes() const { return nodes_; }
  const Tets& tets() const { return tets_; }
  Vec3 node(int i) const { return nodes_.row(i); }

  const Eigen::VectorXd& tetVolumes() const { return tetVolumes_; }
  double totalVolume() const { return tetVolumes_.sum(); }
  double meanEdgeLength() const { return meanEdgeLength_; }
  Vec3 tetCentroid(int e) const;

  const std::vector<BoundaryFace>& boundaryFaces() const { return boundaryFaces_; }

  /// Sorted node indices appearing in boundary faces with any of the labels.
  std::vector<int> labelNodes(std::initializer_list<SurfaceLabel> labels) const;
  std::vector<int> labelNodes(const std::set<SurfaceLabel>& labels) const;

  /// Boundary sub-surface made of the faces with any of the labels.
  /// Throws if the result is empty.
  SurfaceMesh extractSurface(const std::set<SurfaceLabel>& labels) const;

  /// Tets sharing a face with tet e (up to 4 entries).
  const std::vector<std::array<int, 4>>& faceNeighbors() const { return faceNeighbors_; }

  Eigen::AlignedBox3d boundingBox() const;

 private:
  void finalize();
  void applyFaceLabels(const std::vector<std::pair<std::array<int, 3>, SurfaceLabel>>& faceLabels);

  Points nodes_;
  Tets tets_;
  Eigen::VectorXd tetVolumes_;
  double meanEdgeLength_ = 0.0;
  std::vector<BoundaryFace> boundaryFaces_;
  std::vector<std::array<int, 4>> faceNeighbors_;  // -1 where no neighbor
};

/// Triangle surface, either a labeled subset of a TetMesh boundary
/// (parentNodes maps into the parent mesh) or a detached surface such as an
/// extracted isosurface (parentNodes entries are -1).
struct SurfaceMesh {
  Points nodes;
  Triangles triangles;
  std::vector<int> parentNodes;

  int nNodes() const { return static_cast<int>(nodes.rows()); }
  int nTriangles() const { return static_cast<int>(triangles.rows()); }
  Vec3 triangleNormal(int t) const;  // not normalized (area-weighted)
  Vec3 centroid() const;             // area-weighted surface centroid
  double area() const;
};

/// Ordered polyline; if closed, an implicit segment connects last to first.
struct Curve {
  Points points;
  bool closed = false;

  int nPoints() const { return static_cast<int>(points.rows()); }
  double length() const;
};

/// Per-node connected-component labels, contiguous from 0, ordered by the
/// smallest node index contained in each component.
std::vector<int> connectedComponents(const SurfaceMesh& surface, int* nComponents = nullptr);

/// Keeps the triangles whose three nodes all satisfy keepNode; drops unused nodes.
SurfaceMesh surfaceSubset(const SurfaceMesh& surface, const std::vector<char>& keepNode);

/// Number of boundary loops (chains of edges incident to exactly one triangle).
int countBoundaryLoops(const SurfaceMesh& surface);

double tetSignedVolume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

}  // namespace cobiveco
