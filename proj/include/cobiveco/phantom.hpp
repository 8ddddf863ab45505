#pragma once

#include "cobiveco/mesh.hpp"

#include <optional>

namespace cobiveco {

/// Half-ellipsoid shell (circumferential half, truncated at z = 0, polar cap
/// excluded) resembling a ventricular free wall. Boundary labels:
///   Lv  -> lateral cut face at angle 0 (called S1 in tests)
///   Rv  -> lateral cut face at angle pi (S2)
///   Epi -> outer surface
///   Base-> inner surface
/// The z = 0 rim and the lower cut stay unlabeled.
struct ShellParams {
  double semiA = 30.0;  // inner semi-axes (mm)
  double semiB = 30.0;
  double semiC = 50.0;
  double thickness = 8.0;       // wall thickness (mm), along the inner normal
  double thetaStart = 0.12 * 3.14159265358979323846;  // polar angle of the lower cut
  double nonuniformMin = 0.5;   // circumferential thickness multiplier range
  double nonuniformMax = 1.7;
};

enum class ShellKind { Uniform, Nonuniform };

struct ShellPhantom {
  TetMesh mesh;
  /// Outer-surface node ids along the mid-height circumferential ring,
  /// ordered by angle; probe path for contour-spacing measurements.
  std::vector<int> outerMidRing;
  /// Thickness multiplier as a function of the circumferential angle.
  double thicknessAt(double phi) const;
  ShellKind kind = ShellKind::Uniform;
  ShellParams params;
};

ShellPhantom ellipsoidShell(ShellKind kind, int resolution, const ShellParams& params = {});

/// Parametric biventricular phantom: LV ellipsoid wall plus an RV crescent
/// shell wrapped around part of the LV circumference, truncated at z = 0,
/// labeled Base / Epi / LV / RV. Watertight except one basal orifice per
/// ventricle.
struct BivPhantomParams {
  double lvEndoA = 20.0;  // LV endocardial semi-axes (mm)
  double lvEndoB = 20.0;
  double lvEndoC = 35.0;
  double lvWall = 10.0;          // mm
  bool nonuniformWall = false;   // circumferential LV wall variation lvWall +- wallVariation
  double wallVariation = 4.0;    // mm (6..14 for the default wall)
  double rvWall = 4.0;           // mm
  double rvWedgeStartDeg = 15.0;
  double rvWedgeEndDeg = 165.0;  // 150 degree wrap
  double rvGapMax = 12.0;        // largest cavity gap (mm)
  double rvThetaStart = 0.12;    // fraction of the apex-to-base range where the RV begins

  // rigid-motion / scale variants for mapping-error experiments
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  // seed > 0 jitters interior nodes deterministically (robustness studies)
  unsigned seed = 0;
  double jitterAmplitude = 0.10;  // fraction of the layer spacing
};

TetMesh biventricularPhantom(const BivPhantomParams& params, int resolution);

/// Checks the pipeline input contract: all four labels present, mesh
/// connected, and each endocardial surface has exactly one boundary loop
/// (one basal orifice per ventricle). Throws InputError otherwise.
void validatePipelineInput(const TetMesh& mesh);

}  // namespace cobiveco
