#include "cobiveco/coords.hpp"

#include "cobiveco/errors.hpp"
#include "cobiveco/smoothing_spline.hpp"
#include "cobiveco/threading.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

namespace cobiveco {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct SubMesh {
  TetMesh mesh;
  std::vector<int> toParent;    // submesh node -> parent node
  std::vector<int> fromParent;  // parent node -> submesh node or -1
  std::vector<int> tetToParent;
};

SubMesh extractSubMesh(const TetMesh& parent, const std::vector<char>& keepTet) {
  std::vector<int> fromParent(static_cast<std::size_t>(parent.nNodes()), -1);
  std::vector<int> toParent;
  std::vector<std::array<int, 4>> tets;
  std::vector<int> tetToParent;
  for (int e = 0; e < parent.nTets(); ++e) {
    if (!keepTet[static_cast<std::size_t>(e)]) continue;
    std::array<int, 4> tet{};
    for (int k = 0; k < 4; ++k) {
      int g = parent.tets()(e, k);
      if (fromParent[static_cast<std::size_t>(g)] < 0) {
        fromParent[static_cast<std::size_t>(g)] = static_cast<int>(toParent.size());
        toParent.push_back(g);
      }
      tet[static_cast<std::size_t>(k)] = fromParent[static_cast<std::size_t>(g)];
    }
    tets.push_back(tet);
    tetToParent.push_back(e);
  }
  if (tets.empty()) throw NumericError("extractSubMesh: empty region");
  Points nodes(static_cast<Eigen::Index>(toParent.size()), 3);
  for (std::size_t i = 0; i < toParent.size(); ++i) {
    nodes.row(static_cast<Eigen::Index>(i)) = parent.nodes().row(toParent[i]);
  }
  Tets t(static_cast<Eigen::Index>(tets.size()), 4);
  for (std::size_t e = 0; e < tets.size(); ++e) {
    t.row(static_cast<Eigen::Index>(e)) << tets[e][0], tets[e][1], tets[e][2], tets[e][3];
  }
  return SubMesh{TetMesh(std::move(nodes), std::move(t)), std::move(toParent),
                 std::move(fromParent), std::move(tetToParent)};
}

std::vector<int> mapToSubMesh(const std::vector<int>& parentNodes, const SubMesh& sub) {
  std::vector<int> out;
  for (int g : parentNodes) {
    int l = sub.fromParent[static_cast<std::size_t>(g)];
    if (l >= 0) out.push_back(l);
  }
  return out;
}

// one isosurface component with interpolated fields
struct ComponentSurface {
  SurfaceMesh surface;
  std::vector<std::array<int, 2>> sourceEdges;
  std::vector<double> sourceParams;

  ScalarField interpolate(const ScalarField& parentField) const {
    ScalarField out(static_cast<Eigen::Index>(sourceEdges.size()));
    for (std::size_t i = 0; i < sourceEdges.size(); ++i) {
      double t = sourceParams[i];
      out(static_cast<Eigen::Index>(i)) =
          (1.0 - t) * parentField(sourceEdges[i][0]) + t * parentField(sourceEdges[i][1]);
    }
    return out;
  }
};

std::vector<ComponentSurface> splitComponents(const IsoSurface& iso) {
  int nComp = 0;
  std::vector<int> labels = connectedComponents(iso.surface, &nComp);
  std::vector<ComponentSurface> components(static_cast<std::size_t>(nComp));
  for (int c = 0; c < nComp; ++c) {
    std::vector<char> keep(static_cast<std::size_t>(iso.surface.nNodes()), 0);
    for (int i = 0; i < iso.surface.nNodes(); ++i) {
      keep[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == c ? 1 : 0;
    }
    // record the original index per kept node to carry provenance over
    SurfaceMesh sub = surfaceSubset(iso.surface, keep);
    ComponentSurface& comp = components[static_cast<std::size_t>(c)];
    // surfaceSubset keeps no mapping; rebuild it through parentNodes-free matching:
    // we instead carry provenance via a parallel pass below.
    comp.surface = std::move(sub);
    components[static_cast<std::size_t>(c)] = std::move(comp);
  }
  // rebuild node provenance: surfaceSubset preserves first-seen order per
  // component, so recompute the mapping explicitly
  std::vector<std::vector<int>> componentNodes(static_cast<std::size_t>(nComp));
  {
    std::vector<std::vector<char>> seenTri(static_cast<std::size_t>(nComp));
    for (int c = 0; c < nComp; ++c) {
      std::vector<char> keep(static_cast<std::size_t>(iso.surface.nNodes()), 0);
      for (int i = 0; i < iso.surface.nNodes(); ++i) {
        keep[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == c ? 1 : 0;
      }
      std::vector<int> remap(static_cast<std::size_t>(iso.surface.nNodes()), -1);
      auto& order = componentNodes[static_cast<std::size_t>(c)];
      for (int t = 0; t < iso.surface.nTriangles(); ++t) {
        bool all = true;
        for (int k = 0; k < 3; ++k) {
          all = all && keep[static_cast<std::size_t>(iso.surface.triangles(t, k))];
        }
        if (!all) continue;
        for (int k = 0; k < 3; ++k) {
          int g = iso.surface.triangles(t, k);
          if (remap[static_cast<std::size_t>(g)] < 0) {
            remap[static_cast<std::size_t>(g)] = static_cast<int>(order.size());
            order.push_back(g);
          }
        }
      }
    }
  }
  for (int c = 0; c < nComp; ++c) {
    auto& comp = components[static_cast<std::size_t>(c)];
    const auto& order = componentNodes[static_cast<std::size_t>(c)];
    comp.sourceEdges.resize(order.size());
    comp.sourceParams.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      comp.sourceEdges[i] = iso.sourceEdges[static_cast<std::size_t>(order[i])];
      comp.sourceParams[i] = iso.sourceParams[static_cast<std::size_t>(order[i])];
    }
  }
  return components;
}

}  // namespace

double rotationalFromSinCos(double s, double c) {
  double r = std::atan2(s, c) / kTwoPi;
  if (s < 0) r += 1.0;
  return std::clamp(r, 0.0, 1.0);
}

double distanceToCurve(const Vec3& point, const Curve& curve) {
  const int n = curve.nPoints();
  if (n == 0) throw InputError("distanceToCurve: empty curve");
  double best = std::numeric_limits<double>::infinity();
  const int nSegments = curve.closed ? n : n - 1;
  if (n == 1) return (point - Vec3(curve.points.row(0))).norm();
  for (int i = 0; i < nSegments; ++i) {
    Vec3 a = curve.points.row(i);
    Vec3 b = curve.points.row((i + 1) % n);
    Vec3 ab = b - a;
    double len2 = ab.squaredNorm();
    double t = len2 > 0 ? std::clamp((point - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (point - (a + t * ab)).norm());
  }
  return best;
}

TransventricularResult computeTransventricular(const TetMesh& mesh) {
  auto lv = mesh.labelNodes({SurfaceLabel::Lv});
  auto rv = mesh.labelNodes({SurfaceLabel::Rv});
  if (lv.empty() || rv.empty()) {
    throw InputError("computeTransventricular: missing LV or RV endocardial label");
  }
  // rim conflicts (a node on faces of both labels) resolve to the LV
  rv = subtractNodes(std::move(rv), lv);
  DirichletSpec bc({{rv, 0.0}, {lv, 1.0}}, mesh.nNodes());
  TransventricularResult result;
  result.uv = solveLaplace(mesh, bc);
  result.v.resize(mesh.nNodes());
  for (int i = 0; i < mesh.nNodes(); ++i) {
    result.v(i) = result.uv(i) >= 0.5 ? 1.0 : 0.0;  // 0.5 rounds up to the LV
  }
  return result;
}

ScalarField computeTransmural(const TetMesh& mesh1, const std::vector<int>& septalNodes,
                              NormalizationMode mode, double* residual) {
  auto epi = mesh1.labelNodes({SurfaceLabel::Epi});
  auto endo = mesh1.labelNodes({SurfaceLabel::Lv, SurfaceLabel::Rv});
  std::vector<int> zeroSet = epi;
  zeroSet.insert(zeroSet.end(), septalNodes.begin(), septalNodes.end());
  std::sort(zeroSet.begin(), zeroSet.end());
  zeroSet.erase(std::unique(zeroSet.begin(), zeroSet.end()), zeroSet.end());
  // zero set wins a rim conflict
  endo = subtractNodes(std::move(endo), zeroSet);
  DirichletSpec bc({{zeroSet, 0.0}, {endo, 1.0}}, mesh1.nNodes());

  SparseMat lap = laplacianOperator(mesh1);
  ScalarField um = solveLaplace(mesh1, lap, bc, residual);
  if (mode == NormalizationMode::Laplace) return um;

  SparseMat grad = gradientOperator(mesh1);
  VectorField tm = normalizedGradient(mesh1, grad, um);
  ScalarField dEpi = solveTrajectoryDistance(mesh1, grad, tm, zeroSet, +1);
  ScalarField dEndo = solveTrajectoryDistance(mesh1, grad, tm, endo, -1);
  return relativeDistance(mesh1, dEpi, dEndo);
}

Curve extractSeptalCurve(const TetMesh& mesh, const ScalarField& uv) {
  SurfaceMesh epi = mesh.extractSurface({SurfaceLabel::Epi});
  ScalarField uvEpi(epi.nNodes());
  for (int i = 0; i < epi.nNodes(); ++i) uvEpi(i) = uv(epi.parentNodes[static_cast<std::size_t>(i)]);
  auto curves = extractIsocurves(epi, uvEpi, 0.5);
  const IsoCurve* best = nullptr;
  double bestLength = 0.0;
  for (const auto& c : curves) {
    if (c.curve.closed) continue;
    double len = c.curve.length();
    if (len > bestLength) {
      bestLength = len;
      best = &c;
    }
  }
  if (!best) {
    throw NumericError(
        "extractSeptalCurve: no open septal curve on the epicardium (is the base truncated?)");
  }
  return best->curve;
}

RidgeDecomposition computeRidgeDecomposition(const TetMesh& mesh1,
                                             const std::vector<int>& septalNodes,
                                             const Curve& septalCurveAnterior,
                                             const Curve& septalCurvePosterior,
                                             double snapParameter) {
  auto epi = mesh1.labelNodes({SurfaceLabel::Epi});
  // epicardial points of the septal surface are excluded from the zero set so
  // the free walls separate from the septum after remeshing
  std::vector<int> zeroSet = subtractNodes(epi, septalNodes);
  DirichletSpec bc({{zeroSet, 0.0}, {septalNodes, 1.0}}, mesh1.nNodes());

  ScalarField uRidge = solveLaplace(mesh1, bc);
  RidgeDecomposition decomp{splitAtIsovalue(mesh1, uRidge, 0.5, snapParameter),
                            std::move(uRidge),
                            {},
                            {},
                            {},
                            Curve{},
                            SurfaceMesh{}};
  decomp.ridgeSurface = decomp.split.levelSetSurface();
  const SurfaceMesh& ridge = decomp.ridgeSurface;
  if (ridge.nTriangles() == 0) throw NumericError("computeRidgeDecomposition: empty ridge surface");

  const int n = ridge.nNodes();
  std::vector<char> isAnterior(static_cast<std::size_t>(n), 0);
  threading::parallelFor(n, [&](std::int64_t i) {
    Vec3 p = ridge.nodes.row(static_cast<Eigen::Index>(i));
    double dAnt = distanceToCurve(p, septalCurveAnterior);
    double dPost = distanceToCurve(p, septalCurvePosterior);
    isAnterior[static_cast<std::size_t>(i)] = dAnt <= dPost ? 1 : 0;
  });
  for (int i = 0; i < n; ++i) {
    int parent = ridge.parentNodes[static_cast<std::size_t>(i)];
    if (isAnterior[static_cast<std::size_t>(i)]) {
      decomp.ridgeAnteriorNodes.push_back(parent);
    } else {
      decomp.ridgePosteriorNodes.push_back(parent);
    }
  }
  if (decomp.ridgeAnteriorNodes.empty() || decomp.ridgePosteriorNodes.empty()) {
    throw NumericError("computeRidgeDecomposition: ridge classification degenerated to one side");
  }

  // apex curve: anterior nodes adjacent to a posterior node on the ridge
  std::vector<std::set<int>> adjacency(static_cast<std::size_t>(n));
  for (int t = 0; t < ridge.nTriangles(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int a = ridge.triangles(t, k), b = ridge.triangles(t, (k + 1) % 3);
      adjacency[static_cast<std::size_t>(a)].insert(b);
      adjacency[static_cast<std::size_t>(b)].insert(a);
    }
  }
  std::vector<int> apexLocal;
  for (int i = 0; i < n; ++i) {
    if (!isAnterior[static_cast<std::size_t>(i)]) continue;
    for (int nb : adjacency[static_cast<std::size_t>(i)]) {
      if (!isAnterior[static_cast<std::size_t>(nb)]) {
        apexLocal.push_back(i);
        break;
      }
    }
  }
  if (apexLocal.empty()) throw NumericError("computeRidgeDecomposition: empty apex curve");
  for (int l : apexLocal) {
    decomp.apexCurveNodes.push_back(ridge.parentNodes[static_cast<std::size_t>(l)]);
  }

  // order the apex nodes into a polyline by greedy adjacency walking
  std::set<int> apexSet(apexLocal.begin(), apexLocal.end());
  std::vector<int> chain;
  {
    // prefer an endpoint: a node with at most one apex neighbor
    int start = apexLocal.front();
    for (int cand : apexLocal) {
      int deg = 0;
      for (int nb : adjacency[static_cast<std::size_t>(cand)]) deg += apexSet.count(nb) ? 1 : 0;
      if (deg <= 1) {
        start = cand;
        break;
      }
    }
    std::set<int> used;
    int current = start;
    used.insert(current);
    chain.push_back(current);
    while (true) {
      int next = -1;
      for (int nb : adjacency[static_cast<std::size_t>(current)]) {
        if (apexSet.count(nb) && !used.count(nb) && (next < 0 || nb < next)) next = nb;
      }
      if (next < 0) break;
      used.insert(next);
      chain.push_back(next);
      current = next;
    }
  }
  decomp.apexCurve.points.resize(static_cast<Eigen::Index>(chain.size()), 3);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    decomp.apexCurve.points.row(static_cast<Eigen::Index>(i)) = ridge.nodes.row(chain[i]);
  }
  return decomp;
}

RotationalResult computeRotational(const RidgeDecomposition& decomp, const ScalarField& mMesh2,
                                   const ScalarField& vMesh2, const std::vector<int>& baseNodesMesh2,
                                   const PipelineConfig& config) {
  const TetMesh& mesh2 = decomp.split.mesh;
  const int n = mesh2.nNodes();
  if (mMesh2.size() != n || vMesh2.size() != n) {
    throw InputError("computeRotational: field size mismatch");
  }

  // transmural coordinate inverted in the LV for coherent septal gradients
  ScalarField mPrime(n);
  for (int i = 0; i < n; ++i) mPrime(i) = vMesh2(i) >= 0.5 ? -mMesh2(i) : mMesh2(i);

  if (baseNodesMesh2.empty()) throw InputError("computeRotational: empty base node set");
  DirichletSpec bcUa({{decomp.apexCurveNodes, 0.0},
                      {subtractNodes(baseNodesMesh2, decomp.apexCurveNodes), 1.0}},
                     n);
  SparseMat lap2 = laplacianOperator(mesh2);
  ScalarField ua = solveLaplace(mesh2, lap2, bcUa);

  SparseMat grad2 = gradientOperator(mesh2);
  VectorField gm = normalizedGradient(mesh2, grad2, mPrime);
  VectorField gu = normalizedGradient(mesh2, grad2, ua);
  VectorField cross(mesh2.nTets(), 3);
  for (int e = 0; e < mesh2.nTets(); ++e) {
    cross.row(e) = Vec3(gm.row(e)).cross(Vec3(gu.row(e)));
  }
  int fallbacks = 0;
  VectorField tr = normalizeVectorField(mesh2, cross, 1e-12, &fallbacks);
  if (fallbacks > config.maxTangentFallbackFraction * mesh2.nTets()) {
    throw NumericError("computeRotational: " + std::to_string(fallbacks) +
                       " elements with a degenerate rotational tangent (parallel gradients)");
  }

  RotationalResult result;
  result.ua = ua;
  result.tangentFallbacks = fallbacks;
  result.rt.resize(n);
  result.rtSin.resize(n);
  result.rtCos.resize(n);
  result.drFree = ScalarField::Constant(n, -1.0);
  result.drSept = ScalarField::Constant(n, -1.0);
  std::vector<char> assigned(static_cast<std::size_t>(n), 0);

  for (int region = 0; region < 2; ++region) {
    const bool freeWall = region == 0;
    std::vector<char> keep(static_cast<std::size_t>(mesh2.nTets()), 0);
    for (int e = 0; e < mesh2.nTets(); ++e) {
      keep[static_cast<std::size_t>(e)] =
          (decomp.split.side[static_cast<std::size_t>(e)] < 0) == freeWall ? 1 : 0;
    }
    SubMesh sub = extractSubMesh(mesh2, keep);
    std::vector<int> post = mapToSubMesh(decomp.ridgePosteriorNodes, sub);
    std::vector<int> ant = mapToSubMesh(decomp.ridgeAnteriorNodes, sub);
    if (post.empty() || ant.empty()) {
      throw NumericError("computeRotational: a ridge surface does not touch both regions");
    }

    ScalarField dr;
    if (config.normalization == NormalizationMode::Laplace) {
      DirichletSpec bc({{post, 0.0}, {subtractNodes(ant, post), 1.0}}, sub.mesh.nNodes());
      dr = solveLaplace(sub.mesh, bc);
    } else {
      VectorField trSub(sub.mesh.nTets(), 3);
      for (int e = 0; e < sub.mesh.nTets(); ++e) {
        trSub.row(e) = tr.row(sub.tetToParent[static_cast<std::size_t>(e)]);
      }
      SparseMat gradSub = gradientOperator(sub.mesh);
      ScalarField dPost = solveTrajectoryDistance(sub.mesh, gradSub, trSub, post, +1);
      ScalarField dAnt = solveTrajectoryDistance(sub.mesh, gradSub, trSub, ant, -1);
      // the quotient is invariant to the tangent orientation; flip for the
      // diagnostics to keep distances positive
      if (dPost.sum() < 0) {
        dPost = -dPost;
        dAnt = -dAnt;
      }
      dr = relativeDistance(sub.mesh, dPost, dAnt);
    }

    for (int l = 0; l < sub.mesh.nNodes(); ++l) {
      int g = sub.toParent[static_cast<std::size_t>(l)];
      double r = freeWall ? (2.0 / 3.0) * dr(l) : 2.0 / 3.0 + (1.0 / 3.0) * (1.0 - dr(l));
      if (freeWall) {
        result.drFree(g) = dr(l);
      } else {
        result.drSept(g) = dr(l);
      }
      if (!assigned[static_cast<std::size_t>(g)]) {  // free wall wins at shared ridge nodes
        result.rtSin(g) = std::sin(kTwoPi * r);
        result.rtCos(g) = std::cos(kTwoPi * r);
        result.rt(g) = rotationalFromSinCos(result.rtSin(g), result.rtCos(g));
        assigned[static_cast<std::size_t>(g)] = 1;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!assigned[static_cast<std::size_t>(i)]) {
      throw NumericError("computeRotational: node not covered by any region");
    }
  }
  return result;
}

ScalarField computeApicobasal(const ApicobasalInputs& inputs, const PipelineConfig& config,
                              PipelineDiagnostics* diagnostics) {
  const TetMesh& original = *inputs.original;
  const TetMesh& mesh1 = *inputs.mesh1;
  const ScalarField& m1 = *inputs.mMesh1;
  const double meanEdge = original.meanEdgeLength();
  const double epsilon = config.apexTruncationEdgeFactor * meanEdge;

  // transmural isosurfaces of mesh1, one per ventricle and isovalue
  struct CurveJob {
    Points points;       // apex first
    double length = 0.0;
  };
  std::vector<ComponentSurface> shells;
  for (int i = 0; i < config.transmuralIsovalues; ++i) {
    double iso = (2.0 * i + 1.0) / (2.0 * config.transmuralIsovalues);
    IsoSurface surf = extractIsosurface(mesh1, m1, iso);
    for (auto& comp : splitComponents(surf)) {
      if (comp.surface.nTriangles() < 4) continue;  // stray slivers
      shells.push_back(std::move(comp));
    }
  }
  if (shells.empty()) throw NumericError("computeApicobasal: no transmural isosurfaces");

  const int nJ = config.rotationalIsovalues;
  const int expected = static_cast<int>(shells.size()) * nJ;
  std::vector<std::vector<CurveJob>> jobs(shells.size());

  for (std::size_t s = 0; s < shells.size(); ++s) {
    const ComponentSurface& shell = shells[s];
    ScalarField uaS = shell.interpolate(*inputs.uaMesh1);
    ScalarField sinS = shell.interpolate(*inputs.sinMesh1);
    ScalarField cosS = shell.interpolate(*inputs.cosMesh1);
    // per-shell apex: minimum of the apicobasal Laplace solution
    Eigen::Index apexIdx = 0;
    uaS.minCoeff(&apexIdx);
    Vec3 apex = shell.surface.nodes.row(apexIdx);

    auto& shellJobs = jobs[s];
    shellJobs.resize(static_cast<std::size_t>(nJ));
    threading::parallelFor(nJ, [&](std::int64_t jIdx) {
      double rho = static_cast<double>(jIdx + 1) / nJ;
      double sr = std::sin(kTwoPi * rho), cr = std::cos(kTwoPi * rho);
      ScalarField g(shell.surface.nNodes()), h(shell.surface.nNodes());
      for (int i = 0; i < shell.surface.nNodes(); ++i) {
        g(i) = sinS(i) * cr - cosS(i) * sr;  // sin(2 pi (r - rho))
        h(i) = cosS(i) * cr + sinS(i) * sr;  // cos(2 pi (r - rho))
      }
      auto curves = extractIsocurves(shell.surface, g, 0.0);
      // Near the apex the sine/cosine fields lose magnitude and a chain may
      // run through the rotational singularity into the antipodal branch
      // (rho + 1/2). Keep, per chain, the longest contiguous run of points
      // with h > 0 that also stays outside the apex radius, then pick the
      // longest such run across chains.
      const IsoCurve* best = nullptr;
      int bestStart = 0, bestLen = 0;
      double bestArc = 0.0;
      for (const auto& c : curves) {
        ScalarField hOn = c.interpolate(h);
        int runStart = -1;
        for (int i = 0; i <= c.curve.nPoints(); ++i) {
          bool ok = i < c.curve.nPoints() && hOn(i) > 0.0 &&
                    (Vec3(c.curve.points.row(i)) - apex).norm() > epsilon;
          if (ok && runStart < 0) runStart = i;
          if (!ok && runStart >= 0) {
            int len = i - runStart;
            if (len >= 3) {
              double arc = 0.0;
              for (int k = runStart; k + 1 < i; ++k) {
                arc += (c.curve.points.row(k + 1) - c.curve.points.row(k)).norm();
              }
              if (arc > bestArc) {
                bestArc = arc;
                best = &c;
                bestStart = runStart;
                bestLen = len;
              }
            }
            runStart = -1;
          }
        }
      }
      if (!best) return;
      CurveJob job;
      job.points.resize(bestLen + 1, 3);
      Vec3 first = best->curve.points.row(bestStart);
      Vec3 last = best->curve.points.row(bestStart + bestLen - 1);
      bool apexAtFront = (first - apex).norm() <= (last - apex).norm();
      job.points.row(0) = apex;
      for (int k = 0; k < bestLen; ++k) {
        int src = bestStart + (apexAtFront ? k : bestLen - 1 - k);
        job.points.row(k + 1) = best->curve.points.row(src);
      }
      for (Eigen::Index k = 0; k + 1 < job.points.rows(); ++k) {
        job.length += (job.points.row(k + 1) - job.points.row(k)).norm();
      }
      shellJobs[static_cast<std::size_t>(jIdx)] = std::move(job);
    });
  }

  // spline-smooth and resample every found curve
  struct SplinePoints {
    Points samples;
    Eigen::VectorXd aSpline;
  };
  std::vector<CurveJob> found;
  for (auto& shellJobs : jobs) {
    for (auto& job : shellJobs) {
      if (job.points.rows() >= 4 && job.length > 0) found.push_back(std::move(job));
    }
  }
  if (diagnostics) {
    diagnostics->isocurvesExpected = expected;
    diagnostics->isocurvesFound = static_cast<int>(found.size());
  }
  if (static_cast<double>(found.size()) < 0.9 * expected) {
    throw NumericError("computeApicobasal: only " + std::to_string(found.size()) + " of " +
                       std::to_string(expected) + " isocurves found (corrupt upstream fields?)");
  }

  const int nSamples = 100;
  std::vector<SplinePoints> resampled(found.size());
  threading::parallelFor(static_cast<std::int64_t>(found.size()), [&](std::int64_t idx) {
    const CurveJob& job = found[static_cast<std::size_t>(idx)];
    Eigen::VectorXd weights = Eigen::VectorXd::Ones(job.points.rows());
    weights(0) = 100.0;  // pin the spline to the apex
    ResampledCurve curve =
        smoothResampleCurve(job.points, weights, config.splineRmsdRatio * job.length, nSamples);
    SplinePoints& out = resampled[static_cast<std::size_t>(idx)];
    out.samples = std::move(curve.samples);
    out.aSpline.resize(nSamples);
    out.aSpline(0) = 0.0;
    for (int k = 1; k < nSamples; ++k) {
      out.aSpline(k) = out.aSpline(k - 1) + (out.samples.row(k) - out.samples.row(k - 1)).norm();
    }
    double total = out.aSpline(nSamples - 1);
    if (total <= 0) throw NumericError("computeApicobasal: zero-length spline curve");
    out.aSpline /= total;
  });

  // Laplacian extrapolation of the normalized spline distances onto the mesh
  const Eigen::Index nSpline = static_cast<Eigen::Index>(resampled.size()) * nSamples;
  Points splinePoints(nSpline, 3);
  Eigen::VectorXd aSpline(nSpline);
  double meanCurveLength = 0.0;
  for (std::size_t c = 0; c < resampled.size(); ++c) {
    splinePoints.middleRows(static_cast<Eigen::Index>(c) * nSamples, nSamples) = resampled[c].samples;
    aSpline.segment(static_cast<Eigen::Index>(c) * nSamples, nSamples) = resampled[c].aSpline;
    meanCurveLength += found[c].length;
  }
  meanCurveLength /= static_cast<double>(resampled.size());

  InterpolationOptions opts;
  opts.allowNearest = true;  // smoothing may push samples slightly off the volume
  SparseMat interp = interpolationMatrix(original, splinePoints, opts);
  SparseMat lap = laplacianOperator(original);
  if (inputs.baseNodesOriginal.empty()) throw InputError("computeApicobasal: empty base node set");
  SparseMat baseSel = selectionMatrix(inputs.baseNodesOriginal, original.nNodes());
  double eta = std::pow(static_cast<double>(nSpline) /
                            static_cast<double>(inputs.baseNodesOriginal.size()),
                        2.0);

  SparseMat rtr = SparseMat(interp.transpose()) * interp;
  SparseMat ltl = SparseMat(lap.transpose()) * lap;
  SparseMat ete = SparseMat(baseSel.transpose()) * baseSel;
  Eigen::VectorXd rhsBase = interp.transpose() * aSpline;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(inputs.baseNodesOriginal.size()));
  Eigen::VectorXd rhsEta = baseSel.transpose() * ones;

  const bool hardBase = config.baseConstraint == BaseConstraintMode::Hard;
  std::vector<int> freeIndex(static_cast<std::size_t>(original.nNodes()), -1);
  std::vector<int> freeNodes;
  if (hardBase) {
    std::vector<char> isBase(static_cast<std::size_t>(original.nNodes()), 0);
    for (int b : inputs.baseNodesOriginal) isBase[static_cast<std::size_t>(b)] = 1;
    for (int i = 0; i < original.nNodes(); ++i) {
      if (!isBase[static_cast<std::size_t>(i)]) {
        freeIndex[static_cast<std::size_t>(i)] = static_cast<int>(freeNodes.size());
        freeNodes.push_back(i);
      }
    }
  }

  auto solveFor = [&](double lambda, ScalarField& a) {
    SparseMat system = rtr + lambda * ltl + eta * ete;
    Eigen::VectorXd rhs = rhsBase + eta * rhsEta;
    if (!hardBase) {
      Eigen::SimplicialLDLT<SparseMat> solver(system);
      if (solver.info() != Eigen::Success) {
        throw NumericError("computeApicobasal: extrapolation factorization failed");
      }
      a = solver.solve(rhs);
      return;
    }
    const int nf = static_cast<int>(freeNodes.size());
    Eigen::VectorXd bf(nf);
    for (int r = 0; r < nf; ++r) bf(r) = rhs(freeNodes[static_cast<std::size_t>(r)]);
    std::vector<Eigen::Triplet<double>> trips;
    for (int col = 0; col < system.outerSize(); ++col) {
      int fc = freeIndex[static_cast<std::size_t>(col)];
      for (SparseMat::InnerIterator it(system, col); it; ++it) {
        int fr = freeIndex[static_cast<std::size_t>(it.row())];
        if (fr < 0) continue;
        if (fc >= 0) {
          trips.emplace_back(fr, fc, it.value());
        } else {
          bf(fr) -= it.value();  // basal value is exactly 1
        }
      }
    }
    SparseMat reduced(nf, nf);
    reduced.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SparseMat> solver(reduced);
    if (solver.info() != Eigen::Success) {
      throw NumericError("computeApicobasal: extrapolation factorization failed");
    }
    Eigen::VectorXd af = solver.solve(bf);
    a = ScalarField::Ones(original.nNodes());
    for (int r = 0; r < nf; ++r) a(freeNodes[static_cast<std::size_t>(r)]) = af(r);
  };

  auto rmsdFor = [&](const ScalarField& a) {
    Eigen::VectorXd deviation = interp * a - aSpline;
    return std::sqrt(deviation.squaredNorm() / static_cast<double>(deviation.size()));
  };

  const double target = config.extrapTargetRmsdRatio * meanEdge / meanCurveLength;
  double l0 = 1e-2 * meanEdge * meanEdge;
  double l1 = 1e2 * meanEdge * meanEdge;
  ScalarField a;
  solveFor(l0, a);
  double g0 = rmsdFor(a) - target;
  ScalarField a1;
  solveFor(l1, a1);
  double g1 = rmsdFor(a1) - target;
  int iterations = 2;
  double lambda = l1;
  double achieved = g1 + target;
  if (std::abs(g0) <= 0.01 * target) {
    a1 = a;
    lambda = l0;
    achieved = g0 + target;
  } else if (std::abs(g1) > 0.01 * target) {
    // secant iteration on log(lambda); the RMSD grows with lambda, so while
    // both residuals share a sign the bracket is expanded instead
    double x0 = std::log(l0), x1 = std::log(l1);
    double bracketLo = -80.0, bracketHi = 80.0;  // known opposite-sign bounds, if any
    bool haveLo = false, haveHi = false;
    auto note = [&](double x, double g) {
      if (g < 0 && (!haveLo || x > bracketLo)) {
        bracketLo = x;
        haveLo = true;
      }
      if (g > 0 && (!haveHi || x < bracketHi)) {
        bracketHi = x;
        haveHi = true;
      }
    };
    note(x0, g0);
    note(x1, g1);
    bool converged = false;
    for (; iterations < config.secantMaxIterations; ++iterations) {
      double x2;
      if (!haveLo) {
        x2 = std::min(x0, x1) - 5.0;  // all RMSDs above target: shrink lambda
      } else if (!haveHi) {
        x2 = std::max(x0, x1) + 5.0;  // all below: grow lambda
      } else if (std::abs(g1 - g0) > 1e-300) {
        x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if (!std::isfinite(x2) || x2 <= bracketLo || x2 >= bracketHi) {
          x2 = 0.5 * (bracketLo + bracketHi);
        }
      } else {
        x2 = 0.5 * (bracketLo + bracketHi);
      }
      if (x2 < -80.0 || x2 > 80.0) {
        throw NumericError("computeApicobasal: smoothing-weight target unreachable");
      }
      lambda = std::exp(x2);
      solveFor(lambda, a1);
      double g2 = rmsdFor(a1) - target;
      achieved = g2 + target;
      if (std::abs(g2) <= 0.01 * target) {
        converged = true;
        break;
      }
      note(x2, g2);
      x0 = x1;
      g0 = g1;
      x1 = x2;
      g1 = g2;
    }
    if (!converged) {
      throw NumericError("computeApicobasal: secant iteration for the smoothing weight did not "
                         "converge after " +
                         std::to_string(iterations) + " iterations");
    }
  } else {
    lambda = l1;
  }

  if (diagnostics) {
    diagnostics->extrapolationLambda = lambda;
    diagnostics->secantIterations = iterations;
    diagnostics->extrapolationRmsd = achieved;
    double maxDev = 0.0;
    for (int b : inputs.baseNodesOriginal) maxDev = std::max(maxDev, std::abs(a1(b) - 1.0));
    diagnostics->maxBaseDeviation = maxDev;
  }
  for (Eigen::Index i = 0; i < a1.size(); ++i) a1(i) = std::clamp(a1(i), 0.0, 1.0);
  return a1;
}

PipelineResult computeCoordinates(const TetMesh& mesh, const PipelineConfig& config) {
  PipelineResult result;
  auto stepStart = Clock::now();
  auto record = [&](const std::string& name, double residual, int nodes) {
    result.diagnostics.steps.push_back({name, secondsSince(stepStart), residual, nodes});
    stepStart = Clock::now();
  };

  // transventricular
  TransventricularResult tv = computeTransventricular(mesh);
  record("transventricular", 0.0, mesh.nNodes());

  // first remeshing, septal surface and curve
  SplitResult split1 = splitAtIsovalue(mesh, tv.uv, 0.5, config.snapParameter);
  const TetMesh& mesh1 = split1.mesh;
  SurfaceMesh septalSurface = split1.levelSetSurface();
  Curve septalCurve = extractSeptalCurve(mesh, tv.uv);
  record("septal-split", 0.0, mesh1.nNodes());

  // transmural
  double residual = 0.0;
  ScalarField m1 = computeTransmural(mesh1, split1.levelSetNodes, config.normalization, &residual);
  record("transmural", residual, mesh1.nNodes());

  // heart axes and apex
  result.frame = computeHeartFrame(mesh, septalSurface, septalCurve);
  record("landmarks", 0.0, mesh.nNodes());

  // ridge decomposition (mesh2)
  RidgeDecomposition decomp =
      computeRidgeDecomposition(mesh1, split1.levelSetNodes, result.frame.septalCurveAnterior,
                                result.frame.septalCurvePosterior, config.snapParameter);
  const TetMesh& mesh2 = decomp.split.mesh;
  record("ridge-decomposition", 0.0, mesh2.nNodes());

  // rotational
  ScalarField m2 = decomp.split.transfer * m1;
  ScalarField v1 = split1.transfer * tv.v;
  for (Eigen::Index i = 0; i < v1.size(); ++i) v1(i) = v1(i) >= 0.5 ? 1.0 : 0.0;
  ScalarField v2 = decomp.split.transfer * v1;
  for (Eigen::Index i = 0; i < v2.size(); ++i) v2(i) = v2(i) >= 0.5 ? 1.0 : 0.0;
  RotationalResult rot =
      computeRotational(decomp, m2, v2, mesh2.labelNodes({SurfaceLabel::Base}), config);
  result.diagnostics.tangentFallbackElements = rot.tangentFallbacks;
  record("rotational", 0.0, mesh2.nNodes());

  // apicobasal (mesh2 fields restricted to mesh1 nodes, which are a prefix)
  ApicobasalInputs inputs;
  inputs.original = &mesh;
  inputs.mesh1 = &mesh1;
  inputs.mMesh1 = &m1;
  inputs.vMesh1 = &v1;
  ScalarField uaMesh1 = rot.ua.head(mesh1.nNodes());
  ScalarField sinMesh1 = rot.rtSin.head(mesh1.nNodes());
  ScalarField cosMesh1 = rot.rtCos.head(mesh1.nNodes());
  inputs.uaMesh1 = &uaMesh1;
  inputs.sinMesh1 = &sinMesh1;
  inputs.cosMesh1 = &cosMesh1;
  inputs.baseNodesOriginal = mesh.labelNodes({SurfaceLabel::Base});
  result.coords.ab = computeApicobasal(inputs, config, &result.diagnostics);
  record("apicobasal", result.diagnostics.extrapolationRmsd, mesh.nNodes());

  // assemble on the original mesh (a prefix of mesh1 and mesh2)
  const int n = mesh.nNodes();
  result.coords.tv = tv.v;
  result.coords.tm = m1.head(n);
  result.coords.rtSin = rot.rtSin.head(n);
  result.coords.rtCos = rot.rtCos.head(n);
  result.coords.rt.resize(n);
  for (int i = 0; i < n; ++i) {
    result.coords.rt(i) = rotationalFromSinCos(result.coords.rtSin(i), result.coords.rtCos(i));
  }
  record("assembly", 0.0, n);
  return result;
}

void validateCoordinates(const TetMesh& mesh, const CoordinateSet& coords) {
  const int n = mesh.nNodes();
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw NumericError("validateCoordinates: " + what);
  };
  require(coords.tv.size() == n && coords.tm.size() == n && coords.rt.size() == n &&
              coords.ab.size() == n && coords.rtSin.size() == n && coords.rtCos.size() == n,
          "field size mismatch");
  for (int i = 0; i < n; ++i) {
    require(coords.tv(i) == 0.0 || coords.tv(i) == 1.0, "tv not binary at node " + std::to_string(i));
    require(coords.tm(i) >= -1e-9 && coords.tm(i) <= 1.0 + 1e-9, "tm out of range");
    require(coords.rt(i) >= -1e-9 && coords.rt(i) <= 1.0 + 1e-9, "rt out of range");
    require(coords.ab(i) >= -1e-9 && coords.ab(i) <= 1.0 + 1e-9, "ab out of range");
    double unit = coords.rtSin(i) * coords.rtSin(i) + coords.rtCos(i) * coords.rtCos(i);
    require(std::abs(unit - 1.0) < 1e-12, "rtSin^2 + rtCos^2 != 1");
    double recovered = rotationalFromSinCos(coords.rtSin(i), coords.rtCos(i));
    require(std::abs(recovered - coords.rt(i)) < 1e-12, "rt inconsistent with its sine/cosine");
  }
  for (int b : mesh.labelNodes({SurfaceLabel::Base})) {
    require(std::abs(coords.ab(b) - 1.0) < 1e-6, "ab != 1 at basal node " + std::to_string(b));
  }
  for (int e : mesh.labelNodes({SurfaceLabel::Epi})) {
    require(coords.tm(e) < 1e-9, "tm != 0 at epicardial node " + std::to_string(e));
  }
  // rim nodes carrying both labels follow the epicardial (zero-set) precedence
  for (int v : subtractNodes(mesh.labelNodes({SurfaceLabel::Lv, SurfaceLabel::Rv}),
                             mesh.labelNodes({SurfaceLabel::Epi}))) {
    require(coords.tm(v) > 1.0 - 1e-9, "tm != 1 at endocardial node " + std::to_string(v));
  }
}

}  // namespace cobiveco
