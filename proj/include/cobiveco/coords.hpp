#pragma once

#include "cobiveco/landmarks.hpp"
#include "cobiveco/mesh.hpp"
#include "cobiveco/pde.hpp"
#include "cobiveco/remesh.hpp"

#include <string>
#include <vector>

namespace cobiveco {

/// Trajectory (default) computes normalized trajectory distances for the
/// transmural and rotational coordinates; Laplace substitutes the raw Laplace
/// solutions (degraded baseline for evaluation).
enum class NormalizationMode { Trajectory, Laplace };

/// How the basal boundary of the apicobasal extrapolation is enforced: the
/// quadratic penalty with weight eta, or exact elimination of the basal
/// values (penalty weight becomes irrelevant).
enum class BaseConstraintMode { Soft, Hard };

struct PipelineConfig {
  NormalizationMode normalization = NormalizationMode::Trajectory;
  int transmuralIsovalues = 10;
  int rotationalIsovalues = 96;
  double apexTruncationEdgeFactor = 3.0;  // epsilon as a multiple of the input mean edge
  double splineRmsdRatio = 0.005;         // smoothing-spline RMSD / curve length
  double extrapTargetRmsdRatio = 0.25;    // target RMSD * mean curve length / mean edge
  double snapParameter = 0.05;            // isovalue-discretization snapping
  BaseConstraintMode baseConstraint = BaseConstraintMode::Hard;
  int secantMaxIterations = 50;
  double maxTangentFallbackFraction = 0.01;
};

/// The four ventricular coordinates on the input mesh (array names follow the
/// conventional output naming: tv, tm, rt, ab).
struct CoordinateSet {
  ScalarField tv;     // transventricular, binary (RV 0, LV 1)
  ScalarField tm;     // transmural, 0 epicardium/septal mid-surface .. 1 endocardium
  ScalarField rt;     // rotational in [0, 1]
  ScalarField rtSin;  // sin(2 pi rt)
  ScalarField rtCos;  // cos(2 pi rt)
  ScalarField ab;     // apicobasal, 0 apex .. 1 base

  int nNodes() const { return static_cast<int>(tv.size()); }
};

struct StepDiagnostics {
  std::string name;
  double seconds = 0.0;
  double residual = 0.0;
  int nodes = 0;
};

struct PipelineDiagnostics {
  std::vector<StepDiagnostics> steps;
  double extrapolationLambda = 0.0;
  int secantIterations = 0;
  double extrapolationRmsd = 0.0;
  int tangentFallbackElements = 0;
  int isocurvesExpected = 0;
  int isocurvesFound = 0;
  double maxBaseDeviation = 0.0;  // max |ab - 1| over basal nodes
};

/// Transventricular Laplace solution and its binary rounding (0.5 rounds up
/// to the LV).
struct TransventricularResult {
  ScalarField v;
  ScalarField uv;
};
TransventricularResult computeTransventricular(const TetMesh& mesh);

/// Transmural coordinate on mesh1 (the u_v = 0.5 split mesh). septalNodes are
/// mesh1 node ids on the septal mid-surface.
ScalarField computeTransmural(const TetMesh& mesh1, const std::vector<int>& septalNodes,
                              NormalizationMode mode, double* residual = nullptr);

/// Ridge decomposition: split of mesh1 at the ridge Laplace solution 0.5,
/// split ridge surface, and the transmural apex curve.
struct RidgeDecomposition {
  SplitResult split;  // split.mesh is mesh2
  ScalarField uRidge;                  // on mesh1
  std::vector<int> ridgeAnteriorNodes;   // mesh2 ids
  std::vector<int> ridgePosteriorNodes;  // mesh2 ids
  std::vector<int> apexCurveNodes;       // mesh2 ids, subset of the anterior ridge
  Curve apexCurve;
  SurfaceMesh ridgeSurface;  // parentNodes are mesh2 ids
};
RidgeDecomposition computeRidgeDecomposition(const TetMesh& mesh1,
                                             const std::vector<int>& septalNodes,
                                             const Curve& septalCurveAnterior,
                                             const Curve& septalCurvePosterior,
                                             double snapParameter = 0.05);

/// Rotational coordinate on mesh2 plus the apicobasal Laplace solution used
/// to build its tangent field.
struct RotationalResult {
  ScalarField rt;     // on mesh2
  ScalarField rtSin;
  ScalarField rtCos;
  ScalarField ua;     // apicobasal Laplace solution on mesh2
  ScalarField drFree;  // relative trajectory distance per region (diagnostics)
  ScalarField drSept;
  int tangentFallbacks = 0;
};
RotationalResult computeRotational(const RidgeDecomposition& decomp, const ScalarField& mMesh2,
                                   const ScalarField& vMesh2, const std::vector<int>& baseNodesMesh2,
                                   const PipelineConfig& config);

/// Apicobasal coordinate on the original mesh from iso-curve spline lengths
/// and Laplacian extrapolation.
struct ApicobasalInputs {
  const TetMesh* original = nullptr;
  const TetMesh* mesh1 = nullptr;
  const ScalarField* mMesh1 = nullptr;     // transmural on mesh1
  const ScalarField* vMesh1 = nullptr;     // transventricular on mesh1
  const ScalarField* uaMesh1 = nullptr;    // apicobasal Laplace restricted to mesh1 nodes
  const ScalarField* sinMesh1 = nullptr;   // rotational sine restricted to mesh1 nodes
  const ScalarField* cosMesh1 = nullptr;
  std::vector<int> baseNodesOriginal;
};
ScalarField computeApicobasal(const ApicobasalInputs& inputs, const PipelineConfig& config,
                              PipelineDiagnostics* diagnostics = nullptr);

struct PipelineResult {
  CoordinateSet coords;
  HeartFrame frame;
  PipelineDiagnostics diagnostics;
};

/// Runs the full pipeline on a labeled biventricular mesh.
PipelineResult computeCoordinates(const TetMesh& mesh, const PipelineConfig& config = {});

/// Septal curve: isocontour of the transventricular Laplace solution on the
/// epicardium. Returns the longest open contour.
Curve extractSeptalCurve(const TetMesh& mesh, const ScalarField& uv);

/// Inverse of the sine/cosine transform, in [0, 1].
double rotationalFromSinCos(double s, double c);

/// Minimum distance from a point to a polyline.
double distanceToCurve(const Vec3& point, const Curve& curve);

/// Checks all CoordinateSet range/consistency invariants; throws on failure.
void validateCoordinates(const TetMesh& mesh, const CoordinateSet& coords);

}  // namespace cobiveco
