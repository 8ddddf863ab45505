#pragma once

#include "cobiveco/mesh.hpp"

namespace cobiveco {

/// Natural cubic smoothing spline through weighted 3D samples, parameterized
/// by normalized chord length.
struct SmoothingSpline {
  Eigen::VectorXd knots;   // strictly increasing parameters in [0, 1]
  Points values;           // fitted positions at the knots
  Points secondDerivs;     // second derivatives at the knots (natural: 0 at ends)

  Vec3 evaluate(double t) const;
};

struct ResampledCurve {
  Points samples;            // arc-length equidistant points on the spline
  Eigen::VectorXd params;    // spline parameters of the samples
  SmoothingSpline spline;
  double lambda = 0.0;       // smoothing weight that met the RMSD target
  double rmsd = 0.0;         // achieved RMSD from the input points
};

/// Fits one smoothing spline per coordinate with a common smoothing weight,
/// bisected until the RMSD from the input points matches rmsdTarget within
/// 1% (relative). Curves whose maximal smoothing already undershoots the
/// target keep the largest tested weight. The fitted curve is then resampled
/// at nSamples points equidistant in arc length.
ResampledCurve smoothResampleCurve(const Points& points, const Eigen::VectorXd& weights,
                                   double rmsdTarget, int nSamples);

}  // namespace cobiveco
