#include "cobiveco/mapping.hpp"

#include "cobiveco/errors.hpp"
#include "cobiveco/kdtree.hpp"
#include "cobiveco/threading.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace cobiveco {

namespace {

double medianOf(std::vector<double> values) {
  if (values.empty()) throw NumericError("median of an empty set");
  std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid) - 1, values.end());
  return 0.5 * (hi + values[mid - 1]);
}

void checkCoordinateSizes(const CoordinateSet& coords, const char* what) {
  const Eigen::Index n = coords.tv.size();
  if (n == 0 || coords.tm.size() != n || coords.rtSin.size() != n || coords.rtCos.size() != n ||
      coords.ab.size() != n) {
    throw InputError(std::string(what) + ": incomplete coordinate set");
  }
}

}  // namespace

Eigen::MatrixXd CoordinateScaling::apply(const CoordinateSet& coords) const {
  checkCoordinateSizes(coords, "CoordinateScaling::apply");
  const Eigen::Index n = coords.tv.size();
  Eigen::MatrixXd out(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = std::sqrt(std::max(0.0, coords.ab(i)));
    out(i, 0) = coords.tv(i) * vFactor;
    out(i, 1) = coords.tm(i) / mDivisor;
    out(i, 2) = coords.rtSin(i) / sinDivisor * w;
    out(i, 3) = coords.rtCos(i) / cosDivisor * w;
    out(i, 4) = coords.ab(i) / abDivisor;
  }
  return out;
}

CoordinateScaling computeScaling(const TetMesh& sourceMesh, const CoordinateSet& sourceCoords) {
  checkCoordinateSizes(sourceCoords, "computeScaling");
  if (sourceCoords.tv.size() != sourceMesh.nNodes()) {
    throw InputError("computeScaling: coordinates do not match the mesh");
  }
  const int m = sourceMesh.nTets();
  std::vector<double> dm, ds, dc, da;
  dm.reserve(static_cast<std::size_t>(m));
  ds.reserve(static_cast<std::size_t>(m));
  dc.reserve(static_cast<std::size_t>(m));
  da.reserve(static_cast<std::size_t>(m));
  auto maxPairDiff = [&](const ScalarField& f, int e) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = 0; k < 4; ++k) {
      double v = f(sourceMesh.tets()(e, k));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  };
  for (int e = 0; e < m; ++e) {
    dm.push_back(maxPairDiff(sourceCoords.tm, e));
    ds.push_back(maxPairDiff(sourceCoords.rtSin, e));
    dc.push_back(maxPairDiff(sourceCoords.rtCos, e));
    da.push_back(maxPairDiff(sourceCoords.ab, e));
  }
  CoordinateScaling scaling;
  scaling.mDivisor = medianOf(std::move(dm));
  scaling.sinDivisor = medianOf(std::move(ds));
  scaling.cosDivisor = medianOf(std::move(dc));
  scaling.abDivisor = medianOf(std::move(da));
  if (scaling.mDivisor <= 0 || scaling.sinDivisor <= 0 || scaling.cosDivisor <= 0 ||
      scaling.abDivisor <= 0) {
    throw NumericError("computeScaling: degenerate coordinate field (zero median difference)");
  }
  scaling.vFactor = sourceMesh.boundingBox().diagonal().norm() / sourceMesh.meanEdgeLength();
  return scaling;
}

MappingMatrix buildMappingMatrix(const CoordinateSet& targetCoords, const TetMesh& sourceMesh,
                                 const CoordinateSet& sourceCoords, MappingMode mode,
                                 bool allowUnmatched) {
  checkCoordinateSizes(targetCoords, "buildMappingMatrix(target)");
  CoordinateScaling scaling = computeScaling(sourceMesh, sourceCoords);
  Eigen::MatrixXd scaledSource = scaling.apply(sourceCoords);
  Eigen::MatrixXd scaledTarget = scaling.apply(targetCoords);
  const Eigen::Index nTargets = scaledTarget.rows();
  const int nSource = sourceMesh.nNodes();

  MappingMatrix result;
  result.mode = mode;
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(nTargets));
  std::vector<char> matched(static_cast<std::size_t>(nTargets), 0);

  if (mode == MappingMode::Nearest) {
    // per-ventricle node trees
    std::array<std::vector<int>, 2> nodesOf;
    for (int i = 0; i < nSource; ++i) {
      nodesOf[sourceCoords.tv(i) >= 0.5 ? 1 : 0].push_back(i);
    }
    std::array<std::unique_ptr<KdTree>, 2> trees;
    std::array<Eigen::MatrixXd, 2> pts;
    for (int v = 0; v < 2; ++v) {
      pts[static_cast<std::size_t>(v)].resize(static_cast<Eigen::Index>(nodesOf[static_cast<std::size_t>(v)].size()), 5);
      for (std::size_t i = 0; i < nodesOf[static_cast<std::size_t>(v)].size(); ++i) {
        pts[static_cast<std::size_t>(v)].row(static_cast<Eigen::Index>(i)) =
            scaledSource.row(nodesOf[static_cast<std::size_t>(v)][i]);
      }
      if (pts[static_cast<std::size_t>(v)].rows() > 0) {
        trees[static_cast<std::size_t>(v)] = std::make_unique<KdTree>(pts[static_cast<std::size_t>(v)]);
      }
    }
    threading::parallelFor(nTargets, [&](std::int64_t i) {
      int v = targetCoords.tv(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0;
      if (!trees[static_cast<std::size_t>(v)]) return;
      int local = trees[static_cast<std::size_t>(v)]->nearest(scaledTarget.row(static_cast<Eigen::Index>(i)).transpose());
      if (local < 0) return;
      rows[static_cast<std::size_t>(i)] = {{nodesOf[static_cast<std::size_t>(v)][static_cast<std::size_t>(local)], 1.0}};
      matched[static_cast<std::size_t>(i)] = 1;
    });
  } else {
    // per-ventricle centroid trees over uniform-v tets
    std::array<std::vector<int>, 2> tetsOf;
    for (int e = 0; e < sourceMesh.nTets(); ++e) {
      int v0 = sourceCoords.tv(sourceMesh.tets()(e, 0)) >= 0.5 ? 1 : 0;
      bool uniform = true;
      for (int k = 1; k < 4; ++k) {
        uniform = uniform && ((sourceCoords.tv(sourceMesh.tets()(e, k)) >= 0.5 ? 1 : 0) == v0);
      }
      if (uniform) tetsOf[static_cast<std::size_t>(v0)].push_back(e);
    }
    std::array<std::unique_ptr<KdTree>, 2> trees;
    std::array<Eigen::MatrixXd, 2> centroids;
    std::vector<double> diameters;
    for (int v = 0; v < 2; ++v) {
      auto& list = tetsOf[static_cast<std::size_t>(v)];
      centroids[static_cast<std::size_t>(v)].resize(static_cast<Eigen::Index>(list.size()), 5);
      for (std::size_t t = 0; t < list.size(); ++t) {
        Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(5);
        double diameter = 0.0;
        for (int a = 0; a < 4; ++a) {
          c += scaledSource.row(sourceMesh.tets()(list[t], a));
          for (int b = a + 1; b < 4; ++b) {
            diameter = std::max(diameter, (scaledSource.row(sourceMesh.tets()(list[t], a)) -
                                           scaledSource.row(sourceMesh.tets()(list[t], b)))
                                              .norm());
          }
        }
        centroids[static_cast<std::size_t>(v)].row(static_cast<Eigen::Index>(t)) = c / 4.0;
        diameters.push_back(diameter);
      }
      if (centroids[static_cast<std::size_t>(v)].rows() > 0) {
        trees[static_cast<std::size_t>(v)] = std::make_unique<KdTree>(centroids[static_cast<std::size_t>(v)]);
      }
    }
    if (diameters.empty()) throw NumericError("buildMappingMatrix: no uniform-ventricle tets");
    // the paper's "two mean edge lengths" radius, read in scaled coordinate
    // units as twice the median per-tet scaled diameter
    const double radius = 2.0 * medianOf(std::move(diameters));

    // null-space basis of the partition-of-unity constraint
    Eigen::Matrix<double, 4, 3> nullBasis;
    nullBasis << 1, 0, 0, -1, 1, 0, 0, -1, 1, 0, 0, -1;

    threading::parallelFor(nTargets, [&](std::int64_t i) {
      int v = targetCoords.tv(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0;
      const auto& tree = trees[static_cast<std::size_t>(v)];
      if (!tree) return;
      Eigen::VectorXd q = scaledTarget.row(static_cast<Eigen::Index>(i)).transpose();
      int seed = tree->nearest(q);
      if (seed < 0) return;
      Eigen::VectorXd seedCentroid = centroids[static_cast<std::size_t>(v)].row(seed).transpose();
      std::vector<int> candidates = tree->radiusSearch(seedCentroid, radius);
      if (candidates.empty()) candidates.push_back(seed);

      int bestTet = -1;
      double bestScore = std::numeric_limits<double>::infinity();
      Eigen::Vector4d bestWeights = Eigen::Vector4d::Zero();
      for (int local : candidates) {
        int e = tetsOf[static_cast<std::size_t>(v)][static_cast<std::size_t>(local)];
        Eigen::Matrix<double, 5, 4> corners;
        for (int k = 0; k < 4; ++k) corners.col(k) = scaledSource.row(sourceMesh.tets()(e, k)).transpose();
        // least squares over the constraint-satisfying affine subspace
        Eigen::Matrix<double, 5, 3> reduced = corners * nullBasis;
        Eigen::Vector4d b0 = Eigen::Vector4d::Constant(0.25);
        Eigen::Matrix<double, 5, 1> rhs = q - corners * b0;
        Eigen::Vector3d y = (reduced.transpose() * reduced)
                                .ldlt()
                                .solve(reduced.transpose() * rhs);
        Eigen::Vector4d weights = b0 + nullBasis * y;
        double score = (weights.array() - 0.5).abs().maxCoeff();
        if (score < bestScore) {
          bestScore = score;
          bestTet = e;
          bestWeights = weights;
        }
      }
      if (bestTet < 0) return;
      if (bestScore > 1.0) {
        // outside the barycentric extrapolation bound: fall back to the
        // nearest source node of the winning tet (keeps rows bounded)
        int bestNode = sourceMesh.tets()(bestTet, 0);
        double bestDist = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k) {
          int node = sourceMesh.tets()(bestTet, k);
          double d = (scaledSource.row(node).transpose() - q).norm();
          if (d < bestDist || (d == bestDist && node < bestNode)) {
            bestDist = d;
            bestNode = node;
          }
        }
        rows[static_cast<std::size_t>(i)] = {{bestNode, 1.0}};
      } else {
        auto& row = rows[static_cast<std::size_t>(i)];
        for (int k = 0; k < 4; ++k) row.push_back({sourceMesh.tets()(bestTet, k), bestWeights(k)});
      }
      matched[static_cast<std::size_t>(i)] = 1;
    });
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < nTargets; ++i) {
    if (!matched[static_cast<std::size_t>(i)]) {
      if (!allowUnmatched) {
        throw NumericError("buildMappingMatrix: no candidate tet for target " + std::to_string(i) +
                           " (coordinate hole?)");
      }
      result.unmatched.push_back(static_cast<int>(i));
      continue;
    }
    for (const auto& [node, w] : rows[static_cast<std::size_t>(i)]) {
      trips.emplace_back(static_cast<int>(i), node, w);
    }
  }
  result.matrix.resize(nTargets, nSource);
  result.matrix.setFromTriplets(trips.begin(), trips.end());
  return result;
}

Eigen::MatrixXd applyMapping(const MappingMatrix& mapping, const Eigen::MatrixXd& field) {
  if (field.rows() != mapping.matrix.cols()) {
    throw InputError("applyMapping: field size does not match the source mesh");
  }
  return mapping.matrix * field;
}

PolarRaster polarProjection(const TetMesh& mesh, const CoordinateSet& coords,
                            const ScalarField& field, const PolarOptions& options) {
  checkCoordinateSizes(coords, "polarProjection");
  if (field.size() != mesh.nNodes()) throw InputError("polarProjection: field size mismatch");
  if (options.resolution < 8) throw InputError("polarProjection: resolution too small");
  const int res = options.resolution;

  // pixel -> coordinate tuple
  std::vector<std::pair<int, int>> pixels;
  std::vector<double> tvT, tmT, sinT, cosT, abT;
  const double twoThirds = 2.0 / 3.0;
  for (int row = 0; row < res; ++row) {
    for (int col = 0; col < res; ++col) {
      double x = 2.0 * (col + 0.5) / res - 1.0;
      double y = 1.0 - 2.0 * (row + 0.5) / res;
      double radius = std::hypot(x, y);
      if (radius > 1.0) continue;
      double beta = std::atan2(-x, y);  // CCW from north
      if (beta < 0) beta += 2.0 * std::numbers::pi;
      double angle = beta / (2.0 * std::numbers::pi);
      double v = 1.0, m = 0.0, r = 0.0;
      switch (options.layer) {
        case PolarLayer::Epi:
          m = 0.0;
          if (angle <= twoThirds) {
            v = 1.0;
            r = angle;
          } else {
            v = 0.0;
            r = 1.0 - angle;  // counter-rotating RV free wall
          }
          break;
        case PolarLayer::LvEndo:
          v = 1.0;
          m = 1.0;
          r = angle;
          break;
        case PolarLayer::RvEndo:
          v = 0.0;
          m = 1.0;
          r = angle;
          break;
        case PolarLayer::Transmural:
          v = options.ventricle ? 1.0 : 0.0;
          m = options.transmuralValue;
          r = angle;
          break;
      }
      pixels.push_back({row, col});
      tvT.push_back(v);
      tmT.push_back(m);
      sinT.push_back(std::sin(2.0 * std::numbers::pi * r));
      cosT.push_back(std::cos(2.0 * std::numbers::pi * r));
      abT.push_back(radius);
    }
  }

  CoordinateSet targets;
  const Eigen::Index n = static_cast<Eigen::Index>(pixels.size());
  targets.tv = Eigen::Map<Eigen::VectorXd>(tvT.data(), n);
  targets.tm = Eigen::Map<Eigen::VectorXd>(tmT.data(), n);
  targets.rtSin = Eigen::Map<Eigen::VectorXd>(sinT.data(), n);
  targets.rtCos = Eigen::Map<Eigen::VectorXd>(cosT.data(), n);
  targets.ab = Eigen::Map<Eigen::VectorXd>(abT.data(), n);
  targets.rt.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    targets.rt(i) = rotationalFromSinCos(targets.rtSin(i), targets.rtCos(i));
  }

  MappingMatrix mapping = buildMappingMatrix(targets, mesh, coords, MappingMode::Linear, true);
  Eigen::VectorXd mapped = mapping.matrix * field;

  PolarRaster raster;
  raster.values = Eigen::MatrixXd::Constant(res, res, std::numeric_limits<double>::quiet_NaN());
  raster.mask.setZero(res, res);
  std::vector<char> bad(static_cast<std::size_t>(n), 0);
  for (int u : mapping.unmatched) bad[static_cast<std::size_t>(u)] = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (bad[static_cast<std::size_t>(i)]) continue;
    raster.values(pixels[static_cast<std::size_t>(i)].first, pixels[static_cast<std::size_t>(i)].second) = mapped(i);
    raster.mask(pixels[static_cast<std::size_t>(i)].first, pixels[static_cast<std::size_t>(i)].second) = 1;
  }
  raster.apexRow = (res - 1) / 2.0;
  raster.apexCol = (res - 1) / 2.0;
  raster.junctionAngles = {0.0, 2.0 * std::numbers::pi * twoThirds};
  return raster;
}

}  // namespace cobiveco
