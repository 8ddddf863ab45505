#pragma once

#include "cobiveco/mesh.hpp"

#include <utility>

namespace cobiveco {

/// Orthonormal, right-handed heart axes plus the apex/center landmarks.
/// longAxis points from base towards apex; leftRightAxis from the LV towards
/// the RV; anteriorPosteriorAxis = longAxis x leftRightAxis.
struct HeartFrame {
  Vec3 longAxis = Vec3::UnitZ();
  Vec3 leftRightAxis = Vec3::UnitX();
  Vec3 anteriorPosteriorAxis = Vec3::UnitY();
  Vec3 centerPoint = Vec3::Zero();
  Vec3 apexPoint = Vec3::Zero();
  Curve septalCurveAnterior;
  Curve septalCurvePosterior;

  Eigen::Matrix3d axes() const;  // columns long / left-right / anterior-posterior
};

/// Unit vector most orthogonal to the LV endocardial triangle normals,
/// measured by the p-norm (p = 1.373) of the dot products and minimized with
/// a multi-start Nelder-Mead search over the unit sphere. The result is
/// oriented from base towards apex using the base and LV surface centroids.
Vec3 computeLongAxis(const SurfaceMesh& lvEndo, const SurfaceMesh& base);

/// Septal plane normal from a two-step PCA: full-surface fit, truncation to
/// the 20th..90th percentile band of the anterior-posterior projection, then
/// a second fit orthogonalized against the long axis. Returns the axis
/// (oriented LV -> RV) and the truncated surface.
std::pair<Vec3, SurfaceMesh> computeLeftRightAxis(const SurfaceMesh& septal, const Vec3& longAxis,
                                                  const Vec3& lvCentroid, const Vec3& rvCentroid);

struct ApexSplit {
  Vec3 centerPoint;
  Vec3 apexPoint;
  int apexIndex = -1;  // index into the septal curve
  Curve anterior;
  Curve posterior;
};

/// Center point (LV centroid projected along the left-right axis onto the
/// plane through the truncated-septal centroid), apex point (septal-curve
/// point closest to the apex-directed ray from the center) and the resulting
/// anterior/posterior split of the septal curve.
ApexSplit computeApexPoint(const Vec3& longAxis, const Vec3& leftRightAxis,
                           const Vec3& anteriorPosteriorAxis, const Curve& septalCurve,
                           const Vec3& lvCentroid, const Vec3& septalTruncCentroid);

/// Full frame from the boundary surfaces of the original mesh plus the septal
/// surface/curve extracted from the first remeshing.
HeartFrame computeHeartFrame(const TetMesh& mesh, const SurfaceMesh& septalSurface,
                             const Curve& septalCurve);

/// Linear-interpolated percentile of unsorted values (q in [0, 100]).
double percentile(std::vector<double> values, double q);

}  // namespace cobiveco
