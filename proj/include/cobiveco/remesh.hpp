#pragma once

#include "cobiveco/mesh.hpp"
#include "cobiveco/operators.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace cobiveco {

/// Result of isovalue discretization (splitAtIsovalue).
///
/// Output node ids [0, nIn) coincide with the input nodes (same order and
/// positions); inserted level-set nodes follow. `transfer` maps any nodal
/// field from the input to the output mesh; applied to the splitting field
/// it yields exactly `isovalue` on every level-set node, including nodes
/// that were snapped onto the level set.
struct SplitResult {
  TetMesh mesh;
  SparseMat transfer;                // nOut x nIn
  std::vector<int> parentTet;        // per output tet
  std::vector<std::int8_t> side;     // per output tet: -1 (field <= iso), +1 (field >= iso)
  std::vector<int> levelSetNodes;    // sorted output node ids on the level set
  int nInputNodes = 0;

  /// Conforming faces between the two sides, oriented towards the +1 side.
  /// parentNodes refer to the split mesh.
  SurfaceMesh levelSetSurface() const;
};

/// Remeshes so that nodes lie exactly on the isovalue level set. Edge
/// crossings within `snapParameter` of an end node (in normalized edge
/// parameter) snap to that node instead of inserting a new one; crossed
/// tets are split into conforming sub-tets, quads are diagonalized by the
/// smallest-global-index rule so neighboring tets stay conforming.
SplitResult splitAtIsovalue(const TetMesh& mesh, const ScalarField& field, double isovalue,
                            double snapParameter = 0.05);

/// Marching-tetrahedra isosurface of a nodal field. Surface nodes carry
/// provenance (parent edge + parameter) so any nodal field of the parent
/// mesh can be interpolated onto the surface.
struct IsoSurface {
  SurfaceMesh surface;
  std::vector<std::array<int, 2>> sourceEdges;  // per surface node (a, b); a == b for mesh nodes
  std::vector<double> sourceParams;             // value = (1-t)*f(a) + t*f(b)

  ScalarField interpolate(const ScalarField& parentField) const;
};

IsoSurface extractIsosurface(const TetMesh& mesh, const ScalarField& field, double isovalue);

/// Isocontour polyline on a triangle surface, with per-point provenance
/// into the surface nodes.
struct IsoCurve {
  Curve curve;
  std::vector<std::array<int, 2>> sourceEdges;
  std::vector<double> sourceParams;

  ScalarField interpolate(const ScalarField& surfaceField) const;
};

/// Marching-triangles contours of a per-surface-node field. Segments are
/// chained into ordered polylines; open chains come first (ordered by their
/// smallest provenance key), then closed loops. Returns an empty list if the
/// isovalue is outside the field range.
std::vector<IsoCurve> extractIsocurves(const SurfaceMesh& surface, const ScalarField& field,
                                       double isovalue);

/// Splits the prism (u0,u1,u2)-(w0,w1,w2) into 3 tets, choosing each quad
/// diagonal by the smallest-global-index rule so that decompositions of a
/// shared quad always agree. Appends to `out`.
void splitPrismIntoTets(const std::array<int, 3>& u, const std::array<int, 3>& w,
                        std::vector<std::array<int, 4>>& out);

/// Splits the pyramid over the cyclic quad (q0,q1,q2,q3) with the given apex
/// into 2 tets (smallest-global-index diagonal). Appends to `out`.
void splitPyramidIntoTets(const std::array<int, 4>& quad, int apex,
                          std::vector<std::array<int, 4>>& out);

}  // namespace cobiveco
