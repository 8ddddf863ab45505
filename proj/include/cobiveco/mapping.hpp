#pragma once

#include "cobiveco/coords.hpp"
#include "cobiveco/mesh.hpp"
#include "cobiveco/operators.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cobiveco {

/// Scale factors that turn ventricular coordinates into a 5D space with
/// comparable change per unit Euclidean length: m, rtSin, rtCos and ab are
/// divided by the median per-tet maximum node-pair difference of the source
/// mesh, v is multiplied by boundingBoxDiagonal / meanEdge, and the two
/// rotational components additionally carry a per-node sqrt(ab) weight so the
/// mapping stays well defined at the rotational singularities.
struct CoordinateScaling {
  double mDivisor = 1.0;
  double sinDivisor = 1.0;
  double cosDivisor = 1.0;
  double abDivisor = 1.0;
  double vFactor = 1.0;

  /// Rows (v_s, m_s, sin_s, cos_s, ab_s).
  Eigen::MatrixXd apply(const CoordinateSet& coords) const;
};

CoordinateScaling computeScaling(const TetMesh& sourceMesh, const CoordinateSet& sourceCoords);

enum class MappingMode { Linear, Nearest };

/// Sparse interpolation operator from source-mesh nodes to target points,
/// built by matching ventricular coordinates (nTargets x nSourceNodes).
struct MappingMatrix {
  SparseMat matrix;
  MappingMode mode = MappingMode::Linear;
  std::vector<int> unmatched;  // target indices left empty (allowUnmatched only)
};

/// Builds M_{A<-B}: A is any coordinate tuple set (mesh nodes or a point
/// cloud), B a mesh with coordinates. Candidate tets are restricted to the
/// target's ventricle; barycentric weights solve the scaled coordinates in a
/// least-squares sense under the partition-of-unity constraint and the tet
/// with the smallest maximum |b - 0.5| wins. Nearest mode matches nodes
/// directly. Throws when a target finds no candidate unless allowUnmatched.
MappingMatrix buildMappingMatrix(const CoordinateSet& targetCoords, const TetMesh& sourceMesh,
                                 const CoordinateSet& sourceCoords, MappingMode mode,
                                 bool allowUnmatched = false);

/// matrix * field, for one or several columns.
Eigen::MatrixXd applyMapping(const MappingMatrix& mapping, const Eigen::MatrixXd& field);

enum class PolarLayer : std::uint8_t { Epi, LvEndo, RvEndo, Transmural };

struct PolarOptions {
  PolarLayer layer = PolarLayer::Epi;
  double transmuralValue = 0.5;  // Transmural layer only
  int ventricle = 1;             // Transmural layer only: 1 LV, 0 RV
  int resolution = 256;
};

/// Polar projection: pixel radius = apicobasal, angle (counterclockwise from
/// north) = rotational coordinate. Endocardial and transmural layers cover
/// the full rotational range of one ventricle; the epicardial layer shows the
/// LV free wall over angles [0, 4pi/3) and the RV free wall (counter-rotating)
/// over the rest.
struct PolarRaster {
  Eigen::MatrixXd values;                       // resolution x resolution, row 0 = north
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;  // 1 = valid
  double apexRow = 0.0, apexCol = 0.0;          // pixel coordinates of ab = 0
  std::vector<double> junctionAngles;           // radians, CCW from north (r = 0 and r = 2/3)
};

PolarRaster polarProjection(const TetMesh& mesh, const CoordinateSet& coords,
                            const ScalarField& field, const PolarOptions& options);

}  // namespace cobiveco
