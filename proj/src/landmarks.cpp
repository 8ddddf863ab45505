#include "cobiveco/landmarks.hpp"

#include "cobiveco/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace cobiveco {

namespace {

constexpr double kPNorm = 1.373;

Vec3 sphericalDirection(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

// Minimal Nelder-Mead on R^2. Returns true on convergence (simplex diameter
// below tol) within maxIter.
bool nelderMead2d(const std::function<double(const Eigen::Vector2d&)>& objective,
                  Eigen::Vector2d& x, double simplexEdge, double tol, int maxIter) {
  std::array<Eigen::Vector2d, 3> simplex{x, x + Eigen::Vector2d(simplexEdge, 0.0),
                                         x + Eigen::Vector2d(0.0, simplexEdge)};
  std::array<double, 3> value{objective(simplex[0]), objective(simplex[1]), objective(simplex[2])};
  for (int iter = 0; iter < maxIter; ++iter) {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
    const int best = order[0], mid = order[1], worst = order[2];
    double diameter = std::max({(simplex[0] - simplex[1]).norm(), (simplex[1] - simplex[2]).norm(),
                                (simplex[2] - simplex[0]).norm()});
    if (diameter < tol) {
      x = simplex[best];
      return true;
    }
    Eigen::Vector2d centroid = 0.5 * (simplex[best] + simplex[mid]);
    Eigen::Vector2d reflected = centroid + (centroid - simplex[worst]);
    double fr = objective(reflected);
    if (fr < value[best]) {
      Eigen::Vector2d expanded = centroid + 2.0 * (centroid - simplex[worst]);
      double fe = objective(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        value[worst] = fe;
      } else {
        simplex[worst] = reflected;
        value[worst] = fr;
      }
    } else if (fr < value[mid]) {
      simplex[worst] = reflected;
      value[worst] = fr;
    } else {
      Eigen::Vector2d contracted = centroid + 0.5 * (simplex[worst] - centroid);
      double fc = objective(contracted);
      if (fc < value[worst]) {
        simplex[worst] = contracted;
        value[worst] = fc;
      } else {
        for (int i : {mid, worst}) {
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          value[i] = objective(simplex[i]);
        }
      }
    }
  }
  return false;
}

Vec3 nodeMean(const SurfaceMesh& surf) {
  if (surf.nNodes() == 0) throw InputError("nodeMean: empty surface");
  return surf.nodes.colwise().mean();
}

// third principal component of a point set (normal of the best-fitting plane)
Vec3 thirdPrincipalComponent(const Points& pts) {
  Vec3 mean = pts.colwise().mean();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Vec3 d = Vec3(pts.row(i)) - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  return eig.eigenvectors().col(0);  // ascending eigenvalues
}

}  // namespace

Eigen::Matrix3d HeartFrame::axes() const {
  Eigen::Matrix3d m;
  m.col(0) = longAxis;
  m.col(1) = leftRightAxis;
  m.col(2) = anteriorPosteriorAxis;
  return m;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile: empty value set");
  std::sort(values.begin(), values.end());
  double rank = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = static_cast<std::size_t>(std::ceil(rank));
  double frac = rank - static_cast<double>(lo);
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

Vec3 computeLongAxis(const SurfaceMesh& lvEndo, const SurfaceMesh& base) {
  if (lvEndo.nTriangles() == 0) throw InputError("computeLongAxis: empty LV surface");
  Points normals(lvEndo.nTriangles(), 3);
  for (int t = 0; t < lvEndo.nTriangles(); ++t) {
    Vec3 n = lvEndo.triangleNormal(t);
    double len = n.norm();
    if (len <= 0) throw InputError("computeLongAxis: degenerate LV triangle");
    normals.row(t) = n / len;
  }
  auto objective = [&](const Eigen::Vector2d& angles) {
    Vec3 v = sphericalDirection(angles(0), angles(1));
    return (normals * v).array().abs().pow(kPNorm).sum();
  };

  // restarts from the coordinate axes; the +-pairs guard the antipodal
  // parameterization seams
  const std::array<Eigen::Vector2d, 6> starts{
      Eigen::Vector2d(0.5 * std::numbers::pi, 0.0),
      Eigen::Vector2d(0.5 * std::numbers::pi, std::numbers::pi),
      Eigen::Vector2d(0.5 * std::numbers::pi, 0.5 * std::numbers::pi),
      Eigen::Vector2d(0.5 * std::numbers::pi, -0.5 * std::numbers::pi),
      Eigen::Vector2d(1e-3, 0.0),
      Eigen::Vector2d(std::numbers::pi - 1e-3, 0.0)};
  bool anyConverged = false;
  double bestValue = std::numeric_limits<double>::infinity();
  Vec3 bestAxis = Vec3::UnitZ();
  for (const auto& start : starts) {
    Eigen::Vector2d x = start;
    if (!nelderMead2d(objective, x, 0.2, 1e-6, 1000)) continue;
    anyConverged = true;
    double f = objective(x);
    if (f < bestValue) {
      bestValue = f;
      bestAxis = sphericalDirection(x(0), x(1));
    }
  }
  if (!anyConverged) throw NumericError("computeLongAxis: Nelder-Mead did not converge");

  Vec3 towardsApex = nodeMean(lvEndo) - nodeMean(base);
  if (bestAxis.dot(towardsApex) < 0) bestAxis = -bestAxis;
  return bestAxis.normalized();
}

std::pair<Vec3, SurfaceMesh> computeLeftRightAxis(const SurfaceMesh& septal, const Vec3& longAxis,
                                                  const Vec3& lvCentroid, const Vec3& rvCentroid) {
  if (septal.nNodes() == 0) throw InputError("computeLeftRightAxis: empty septal surface");
  Vec3 leftToRight = rvCentroid - lvCentroid;

  Vec3 lrEntire = thirdPrincipalComponent(septal.nodes);
  if (lrEntire.dot(leftToRight) < 0) lrEntire = -lrEntire;
  Vec3 apEntire = longAxis.cross(lrEntire).normalized();

  std::vector<double> projections(static_cast<std::size_t>(septal.nNodes()));
  for (int i = 0; i < septal.nNodes(); ++i) {
    projections[static_cast<std::size_t>(i)] = Vec3(septal.nodes.row(i)).dot(apEntire);
  }
  // anterior 20 %, posterior 10 % removed
  double lo = percentile(projections, 20.0);
  double hi = percentile(projections, 90.0);
  std::vector<char> keep(static_cast<std::size_t>(septal.nNodes()), 0);
  int nKept = 0;
  for (int i = 0; i < septal.nNodes(); ++i) {
    if (projections[static_cast<std::size_t>(i)] > lo && projections[static_cast<std::size_t>(i)] < hi) {
      keep[static_cast<std::size_t>(i)] = 1;
      ++nKept;
    }
  }
  if (nKept < 3) throw InputError("computeLeftRightAxis: truncation removed the septal surface");
  SurfaceMesh truncated = surfaceSubset(septal, keep);
  if (truncated.nTriangles() == 0) {
    throw InputError("computeLeftRightAxis: truncated septal surface has no triangles");
  }

  Vec3 lrTrunc = thirdPrincipalComponent(truncated.nodes);
  Vec3 axis = lrTrunc - lrTrunc.dot(longAxis) * longAxis;
  double norm = axis.norm();
  if (norm < 1e-12) throw NumericError("computeLeftRightAxis: septal normal parallel to the long axis");
  axis /= norm;
  if (axis.dot(leftToRight) < 0) axis = -axis;
  return {axis, std::move(truncated)};
}

ApexSplit computeApexPoint(const Vec3& longAxis, const Vec3& leftRightAxis,
                           const Vec3& anteriorPosteriorAxis, const Curve& septalCurve,
                           const Vec3& lvCentroid, const Vec3& septalTruncCentroid) {
  if (septalCurve.nPoints() < 3) throw InputError("computeApexPoint: septal curve too short");
  ApexSplit result;
  result.centerPoint =
      lvCentroid + (septalTruncCentroid - lvCentroid).dot(leftRightAxis) * leftRightAxis;

  double bestDist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < septalCurve.nPoints(); ++i) {
    Vec3 x = septalCurve.points.row(i);
    double t = (x - result.centerPoint).dot(longAxis);
    if (t <= 0) continue;  // only the apex-directed ray
    double dist = ((x - result.centerPoint) - t * longAxis).norm();
    if (dist < bestDist) {
      bestDist = dist;
      result.apexIndex = i;
    }
  }
  if (result.apexIndex < 0) {
    throw NumericError("computeApexPoint: no septal-curve point on the apex side of the center");
  }
  result.apexPoint = septalCurve.points.row(result.apexIndex);

  const int n = septalCurve.nPoints();
  Curve first, second;
  first.points = septalCurve.points.topRows(result.apexIndex + 1);
  second.points = septalCurve.points.bottomRows(n - result.apexIndex);
  if (first.nPoints() < 2 || second.nPoints() < 2) {
    throw NumericError("computeApexPoint: apex at a curve end, cannot split");
  }
  auto meanProjection = [&](const Curve& c) {
    double acc = 0.0;
    for (int i = 0; i < c.nPoints(); ++i) {
      acc += (Vec3(c.points.row(i)) - result.apexPoint).dot(anteriorPosteriorAxis);
    }
    return acc / c.nPoints();
  };
  if (meanProjection(first) >= meanProjection(second)) {
    result.anterior = std::move(first);
    result.posterior = std::move(second);
  } else {
    result.anterior = std::move(second);
    result.posterior = std::move(first);
  }
  return result;
}

HeartFrame computeHeartFrame(const TetMesh& mesh, const SurfaceMesh& septalSurface,
                             const Curve& septalCurve) {
  SurfaceMesh lvEndo = mesh.extractSurface({SurfaceLabel::Lv});
  SurfaceMesh rvEndo = mesh.extractSurface({SurfaceLabel::Rv});
  SurfaceMesh base = mesh.extractSurface({SurfaceLabel::Base});

  HeartFrame frame;
  frame.longAxis = computeLongAxis(lvEndo, base);
  auto [leftRight, truncated] =
      computeLeftRightAxis(septalSurface, frame.longAxis, nodeMean(lvEndo), nodeMean(rvEndo));
  frame.leftRightAxis = leftRight;
  frame.anteriorPosteriorAxis = frame.longAxis.cross(frame.leftRightAxis).normalized();

  ApexSplit apex = computeApexPoint(frame.longAxis, frame.leftRightAxis,
                                    frame.anteriorPosteriorAxis, septalCurve, nodeMean(lvEndo),
                                    nodeMean(truncated));
  frame.centerPoint = apex.centerPoint;
  frame.apexPoint = apex.apexPoint;
  frame.septalCurveAnterior = std::move(apex.anterior);
  frame.septalCurvePosterior = std::move(apex.posterior);
  return frame;
}

}  // namespace cobiveco
