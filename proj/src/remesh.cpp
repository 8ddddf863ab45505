#include "cobiveco/remesh.hpp"

#include "cobiveco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace cobiveco {

namespace {

constexpr int kTetFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
constexpr int kTetEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

std::uint64_t edgeKey(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

void splitPrismIntoTets(const std::array<int, 3>& u, const std::array<int, 3>& w,
                        std::vector<std::array<int, 4>>& out) {
  std::array<bool, 3> diagFromU{};
  for (int i = 0; i < 3; ++i) {
    int j = (i + 1) % 3;
    int mn = std::min({u[i], u[j], w[i], w[j]});
    diagFromU[i] = (mn == u[i] || mn == w[j]);  // diagonal (u_i, w_j)
  }
  int pick = -1;
  for (int i = 0; i < 3; ++i) {
    if (diagFromU[i] && !diagFromU[(i + 2) % 3]) {
      pick = i;
      break;
    }
  }
  if (pick < 0) throw NumericError("splitPrismIntoTets: inconsistent diagonal pattern");
  // Both diagonals adjacent to u[pick] start there; the tet (w0,w1,w2,u[pick])
  // splits off and the rest is a pyramid over the remaining quad, cut along
  // that quad's own diagonal.
  const int i0 = pick, i1 = (pick + 1) % 3, i2 = (pick + 2) % 3;
  out.push_back({w[0], w[1], w[2], u[i0]});
  if (diagFromU[i1]) {  // quad (u_i1, u_i2, w_i2, w_i1) cut along (u_i1, w_i2)
    out.push_back({u[i1], u[i2], w[i2], u[i0]});
    out.push_back({u[i1], w[i2], w[i1], u[i0]});
  } else {  // cut along (u_i2, w_i1)
    out.push_back({u[i1], u[i2], w[i1], u[i0]});
    out.push_back({u[i2], w[i2], w[i1], u[i0]});
  }
}

void splitPyramidIntoTets(const std::array<int, 4>& q, int apex,
                          std::vector<std::array<int, 4>>& out) {
  int mn = std::min({q[0], q[1], q[2], q[3]});
  if (mn == q[0] || mn == q[2]) {
    out.push_back({q[0], q[1], q[2], apex});
    out.push_back({q[0], q[2], q[3], apex});
  } else {
    out.push_back({q[1], q[2], q[3], apex});
    out.push_back({q[1], q[3], q[0], apex});
  }
}

SurfaceMesh SplitResult::levelSetSurface() const {
  std::vector<char> onLevel(static_cast<std::size_t>(mesh.nNodes()), 0);
  for (int v : levelSetNodes) onLevel[static_cast<std::size_t>(v)] = 1;
  std::vector<std::array<int, 3>> tris;
  const auto& neighbors = mesh.faceNeighbors();
  for (int e = 0; e < mesh.nTets(); ++e) {
    if (side[static_cast<std::size_t>(e)] != -1) continue;
    for (int f = 0; f < 4; ++f) {
      int n = neighbors[static_cast<std::size_t>(e)][static_cast<std::size_t>(f)];
      if (n < 0 || side[static_cast<std::size_t>(n)] != 1) continue;
      std::array<int, 3> tri{mesh.tets()(e, kTetFaces[f][0]), mesh.tets()(e, kTetFaces[f][1]),
                             mesh.tets()(e, kTetFaces[f][2])};
      bool all = true;
      for (int v : tri) all = all && onLevel[static_cast<std::size_t>(v)];
      if (all) tris.push_back(tri);
    }
  }
  if (tris.empty()) throw NumericError("levelSetSurface: level set is empty");
  SurfaceMesh surf;
  std::vector<int> remap(static_cast<std::size_t>(mesh.nNodes()), -1);
  std::vector<int> kept;
  surf.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int g = tris[t][static_cast<std::size_t>(k)];
      if (remap[static_cast<std::size_t>(g)] < 0) {
        remap[static_cast<std::size_t>(g)] = static_cast<int>(kept.size());
        kept.push_back(g);
      }
      surf.triangles(static_cast<Eigen::Index>(t), k) = remap[static_cast<std::size_t>(g)];
    }
  }
  surf.nodes.resize(static_cast<Eigen::Index>(kept.size()), 3);
  surf.parentNodes.resize(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    surf.nodes.row(static_cast<Eigen::Index>(i)) = mesh.nodes().row(kept[i]);
    surf.parentNodes[i] = kept[i];
  }
  return surf;
}

SplitResult splitAtIsovalue(const TetMesh& mesh, const ScalarField& field, double isovalue,
                            double snapParameter) {
  const int n = mesh.nNodes();
  const int m = mesh.nTets();
  if (field.size() != n) throw InputError("splitAtIsovalue: field size mismatch");
  if (!field.allFinite()) throw InputError("splitAtIsovalue: field has non-finite values");

  // Node status: -1 below, +1 above, 0 on the level set.
  std::vector<std::int8_t> status(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double d = field(i) - isovalue;
    status[static_cast<std::size_t>(i)] = d < 0 ? -1 : (d > 0 ? 1 : 0);
  }

  // Snap pass: a crossing within snapParameter of an end node moves that
  // node onto the level set. Each snapped node remembers its best (closest)
  // crossing edge for the transfer weights.
  struct Snap {
    double dist = std::numeric_limits<double>::infinity();
    int other = -1;
    double theta = 0.0;  // parameter from this node towards other
  };
  std::unordered_map<int, Snap> snaps;
  std::unordered_map<std::uint64_t, char> visitedEdges;
  for (int e = 0; e < m; ++e) {
    for (const auto& le : kTetEdges) {
      int a = mesh.tets()(e, le[0]);
      int b = mesh.tets()(e, le[1]);
      if (static_cast<int>(status[static_cast<std::size_t>(a)]) *
              static_cast<int>(status[static_cast<std::size_t>(b)]) !=
          -1) {
        continue;
      }
      if (!visitedEdges.emplace(edgeKey(a, b), 1).second) continue;
      if (a > b) std::swap(a, b);
      double theta = (isovalue - field(a)) / (field(b) - field(a));
      auto consider = [&](int node, int other, double dist, double towardsOther) {
        if (dist > snapParameter) return;
        Snap& s = snaps[node];
        if (dist < s.dist || (dist == s.dist && other < s.other)) {
          s.dist = dist;
          s.other = other;
          s.theta = towardsOther;
        }
      };
      consider(a, b, theta, theta);
      consider(b, a, 1.0 - theta, 1.0 - theta);
    }
  }
  for (const auto& [node, snap] : snaps) status[static_cast<std::size_t>(node)] = 0;

  // Final crossings between the remaining strict signs.
  Points outNodes(n, 3);
  outNodes = mesh.nodes();
  std::vector<Eigen::Triplet<double>> transferTrips;
  transferTrips.reserve(static_cast<std::size_t>(n) + snaps.size());
  for (int i = 0; i < n; ++i) {
    auto it = snaps.find(i);
    if (it == snaps.end()) {
      transferTrips.emplace_back(i, i, 1.0);
    } else {
      transferTrips.emplace_back(i, i, 1.0 - it->second.theta);
      transferTrips.emplace_back(i, it->second.other, it->second.theta);
    }
  }

  std::unordered_map<std::uint64_t, int> cutNode;
  std::vector<Vec3> newNodes;
  auto getCut = [&](int a, int b) {
    std::uint64_t key = edgeKey(a, b);
    auto it = cutNode.find(key);
    if (it != cutNode.end()) return it->second;
    if (a > b) std::swap(a, b);
    double theta = (isovalue - field(a)) / (field(b) - field(a));
    int id = n + static_cast<int>(newNodes.size());
    newNodes.push_back((1.0 - theta) * Vec3(mesh.node(a)) + theta * Vec3(mesh.node(b)));
    transferTrips.emplace_back(id, a, 1.0 - theta);
    transferTrips.emplace_back(id, b, theta);
    cutNode.emplace(key, id);
    return id;
  };

  std::vector<std::array<int, 4>> outTets;
  std::vector<int> parent;
  std::vector<std::int8_t> outSide;
  outTets.reserve(static_cast<std::size_t>(m));
  std::vector<std::array<int, 4>> scratch;
  for (int e = 0; e < m; ++e) {
    std::array<int, 4> verts{mesh.tets()(e, 0), mesh.tets()(e, 1), mesh.tets()(e, 2),
                             mesh.tets()(e, 3)};
    std::vector<int> minus, zero, plus;
    for (int v : verts) {
      switch (status[static_cast<std::size_t>(v)]) {
        case -1: minus.push_back(v); break;
        case 0: zero.push_back(v); break;
        default: plus.push_back(v); break;
      }
    }
    auto emit = [&](const std::array<int, 4>& t, std::int8_t s) {
      outTets.push_back(t);
      parent.push_back(e);
      outSide.push_back(s);
    };
    if (minus.empty() || plus.empty()) {
      emit(verts, minus.empty() ? std::int8_t(1) : std::int8_t(-1));
      continue;
    }
    const std::size_t nM = minus.size(), nP = plus.size();
    if (nM == 1 && nP == 1) {
      int c = getCut(minus[0], plus[0]);
      emit({minus[0], c, zero[0], zero[1]}, -1);
      emit({plus[0], c, zero[0], zero[1]}, 1);
    } else if (nM == 1 && nP == 2) {
      int c0 = getCut(minus[0], plus[0]);
      int c1 = getCut(minus[0], plus[1]);
      emit({minus[0], c0, c1, zero[0]}, -1);
      scratch.clear();
      splitPyramidIntoTets({c0, c1, plus[1], plus[0]}, zero[0], scratch);
      for (const auto& t : scratch) emit(t, 1);
    } else if (nM == 2 && nP == 1) {
      int c0 = getCut(minus[0], plus[0]);
      int c1 = getCut(minus[1], plus[0]);
      emit({plus[0], c0, c1, zero[0]}, 1);
      scratch.clear();
      splitPyramidIntoTets({c0, c1, minus[1], minus[0]}, zero[0], scratch);
      for (const auto& t : scratch) emit(t, -1);
    } else if (nM == 1 && nP == 3) {
      std::array<int, 3> c{getCut(minus[0], plus[0]), getCut(minus[0], plus[1]),
                           getCut(minus[0], plus[2])};
      emit({minus[0], c[0], c[1], c[2]}, -1);
      scratch.clear();
      splitPrismIntoTets(c, {plus[0], plus[1], plus[2]}, scratch);
      for (const auto& t : scratch) emit(t, 1);
    } else if (nM == 3 && nP == 1) {
      std::array<int, 3> c{getCut(minus[0], plus[0]), getCut(minus[1], plus[0]),
                           getCut(minus[2], plus[0])};
      emit({plus[0], c[0], c[1], c[2]}, 1);
      scratch.clear();
      splitPrismIntoTets(c, {minus[0], minus[1], minus[2]}, scratch);
      for (const auto& t : scratch) emit(t, -1);
    } else {  // 2-2
      int c00 = getCut(minus[0], plus[0]);
      int c01 = getCut(minus[0], plus[1]);
      int c10 = getCut(minus[1], plus[0]);
      int c11 = getCut(minus[1], plus[1]);
      scratch.clear();
      splitPrismIntoTets({minus[0], c00, c01}, {minus[1], c10, c11}, scratch);
      for (const auto& t : scratch) emit(t, -1);
      scratch.clear();
      splitPrismIntoTets({plus[0], c00, c10}, {plus[1], c01, c11}, scratch);
      for (const auto& t : scratch) emit(t, 1);
    }
  }

  const int nOut = n + static_cast<int>(newNodes.size());
  Points allNodes(nOut, 3);
  allNodes.topRows(n) = mesh.nodes();
  for (std::size_t i = 0; i < newNodes.size(); ++i) {
    allNodes.row(n + static_cast<Eigen::Index>(i)) = newNodes[i];
  }
  Tets tets(static_cast<Eigen::Index>(outTets.size()), 4);
  for (std::size_t t = 0; t < outTets.size(); ++t) {
    tets.row(static_cast<Eigen::Index>(t)) << outTets[t][0], outTets[t][1], outTets[t][2],
        outTets[t][3];
  }

  // quality floor before committing to mesh construction
  for (std::size_t t = 0; t < outTets.size(); ++t) {
    Vec3 a = allNodes.row(outTets[t][0]);
    Vec3 b = allNodes.row(outTets[t][1]);
    Vec3 c = allNodes.row(outTets[t][2]);
    Vec3 d = allNodes.row(outTets[t][3]);
    double vol = std::abs(tetSignedVolume(a, b, c, d));
    double meanEdge = ((b - a).norm() + (c - a).norm() + (d - a).norm() + (c - b).norm() +
                       (d - b).norm() + (d - c).norm()) /
                      6.0;
    if (vol / (meanEdge * meanEdge * meanEdge) <= 1e-6) {
      throw NumericError("splitAtIsovalue: sub-tet of parent " + std::to_string(parent[t]) +
                         " below quality floor (v/l^3 = " +
                         std::to_string(vol / (meanEdge * meanEdge * meanEdge)) + ")");
    }
  }

  // inherit boundary labels from the parent faces
  struct TripleHash {
    std::size_t operator()(const std::array<int, 3>& k) const {
      std::size_t h = 1469598103934665603ull;
      for (int v : k) {
        h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  std::unordered_map<std::array<int, 3>, SurfaceLabel, TripleHash> parentLabels;
  for (const auto& bf : mesh.boundaryFaces()) {
    std::array<int, 3> key{bf.nodes[0], bf.nodes[1], bf.nodes[2]};
    std::sort(key.begin(), key.end());
    parentLabels.emplace(key, bf.label);
  }
  std::unordered_map<int, std::array<int, 2>> cutProvenance;
  for (const auto& [key, id] : cutNode) {
    cutProvenance[id] = {static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)};
  }

  TetMesh outMesh(std::move(allNodes), std::move(tets));
  std::vector<std::pair<std::array<int, 3>, SurfaceLabel>> faceLabels;
  for (const auto& bf : outMesh.boundaryFaces()) {
    int p = parent[static_cast<std::size_t>(bf.tet)];
    // collect the provenance node set of this face
    std::array<int, 6> prov{};
    int nProv = 0;
    for (int v : bf.nodes) {
      if (v < n) {
        prov[static_cast<std::size_t>(nProv++)] = v;
      } else {
        auto& pq = cutProvenance.at(v);
        prov[static_cast<std::size_t>(nProv++)] = pq[0];
        prov[static_cast<std::size_t>(nProv++)] = pq[1];
      }
    }
    SurfaceLabel label = SurfaceLabel::None;
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> pf{mesh.tets()(p, kTetFaces[f][0]), mesh.tets()(p, kTetFaces[f][1]),
                            mesh.tets()(p, kTetFaces[f][2])};
      bool contained = true;
      for (int k = 0; k < nProv && contained; ++k) {
        contained = prov[static_cast<std::size_t>(k)] == pf[0] ||
                    prov[static_cast<std::size_t>(k)] == pf[1] ||
                    prov[static_cast<std::size_t>(k)] == pf[2];
      }
      if (!contained) continue;
      std::sort(pf.begin(), pf.end());
      auto it = parentLabels.find(pf);
      if (it != parentLabels.end()) {
        label = it->second;
        break;
      }
    }
    if (label != SurfaceLabel::None) {
      faceLabels.push_back({bf.nodes, label});
    }
  }

  SplitResult result{TetMesh(outMesh, faceLabels), SparseMat(), {}, {}, {}, n};
  result.transfer.resize(nOut, n);
  result.transfer.setFromTriplets(transferTrips.begin(), transferTrips.end());
  result.parentTet = std::move(parent);
  result.side = std::move(outSide);
  for (int i = 0; i < n; ++i) {
    if (status[static_cast<std::size_t>(i)] == 0) result.levelSetNodes.push_back(i);
  }
  for (int i = n; i < nOut; ++i) result.levelSetNodes.push_back(i);
  return result;
}

ScalarField IsoSurface::interpolate(const ScalarField& parentField) const {
  ScalarField out(static_cast<Eigen::Index>(sourceEdges.size()));
  for (std::size_t i = 0; i < sourceEdges.size(); ++i) {
    double t = sourceParams[i];
    out(static_cast<Eigen::Index>(i)) =
        (1.0 - t) * parentField(sourceEdges[i][0]) + t * parentField(sourceEdges[i][1]);
  }
  return out;
}

IsoSurface extractIsosurface(const TetMesh& mesh, const ScalarField& field, double isovalue) {
  const int n = mesh.nNodes();
  if (field.size() != n) throw InputError("extractIsosurface: field size mismatch");

  std::vector<std::int8_t> status(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double d = field(i) - isovalue;
    status[static_cast<std::size_t>(i)] = d < 0 ? -1 : (d > 0 ? 1 : 0);
  }

  // surface nodes keyed by provenance: (i,i) for mesh nodes, sorted (a,b) for cuts
  std::map<std::pair<int, int>, int> nodeIds;
  std::vector<std::array<int, 2>> sourceEdges;
  std::vector<double> sourceParams;
  std::vector<Vec3> positions;
  auto nodeFor = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    auto it = nodeIds.find({a, b});
    if (it != nodeIds.end()) return it->second;
    int id = static_cast<int>(positions.size());
    double t = a == b ? 0.0 : (isovalue - field(a)) / (field(b) - field(a));
    positions.push_back((1.0 - t) * Vec3(mesh.node(a)) + t * Vec3(mesh.node(b)));
    sourceEdges.push_back({a, b});
    sourceParams.push_back(t);
    nodeIds.emplace(std::make_pair(a, b), id);
    return id;
  };

  std::vector<std::array<int, 3>> tris;
  std::map<std::array<int, 3>, char> seen;  // dedupe triangles made purely of mesh nodes
  auto emit = [&](std::array<int, 3> tri, const Vec3& towardsPlus) {
    std::array<int, 3> key = tri;
    std::sort(key.begin(), key.end());
    if (!seen.emplace(key, 1).second) return;
    Vec3 a = positions[static_cast<std::size_t>(tri[0])];
    Vec3 b = positions[static_cast<std::size_t>(tri[1])];
    Vec3 c = positions[static_cast<std::size_t>(tri[2])];
    if ((b - a).cross(c - a).dot(towardsPlus) < 0) std::swap(tri[1], tri[2]);
    tris.push_back(tri);
  };

  for (int e = 0; e < mesh.nTets(); ++e) {
    std::vector<int> minus, zero, plus;
    for (int k = 0; k < 4; ++k) {
      int v = mesh.tets()(e, k);
      switch (status[static_cast<std::size_t>(v)]) {
        case -1: minus.push_back(v); break;
        case 0: zero.push_back(v); break;
        default: plus.push_back(v); break;
      }
    }
    if (plus.empty() && zero.size() < 3) continue;
    Vec3 plusCentroid = Vec3::Zero();
    for (int v : plus) plusCentroid += Vec3(mesh.node(v));
    if (!plus.empty()) plusCentroid /= static_cast<double>(plus.size());
    Vec3 faceCenter;
    auto dirTowardsPlus = [&](const std::array<int, 3>& tri) {
      faceCenter = (positions[static_cast<std::size_t>(tri[0])] + positions[static_cast<std::size_t>(tri[1])] +
                    positions[static_cast<std::size_t>(tri[2])]) /
                   3.0;
      return plus.empty() ? Vec3(0, 0, 1) : Vec3(plusCentroid - faceCenter);
    };
    const std::size_t nM = minus.size(), nZ = zero.size(), nP = plus.size();
    if (nZ == 3 && nM + nP == 1) {
      std::array<int, 3> tri{nodeFor(zero[0], zero[0]), nodeFor(zero[1], zero[1]),
                             nodeFor(zero[2], zero[2])};
      emit(tri, dirTowardsPlus(tri));
    } else if (nM == 1 && nP == 1 && nZ == 2) {
      std::array<int, 3> tri{nodeFor(minus[0], plus[0]), nodeFor(zero[0], zero[0]),
                             nodeFor(zero[1], zero[1])};
      emit(tri, dirTowardsPlus(tri));
    } else if (nM == 1 && nP == 2 && nZ == 1) {
      std::array<int, 3> tri{nodeFor(minus[0], plus[0]), nodeFor(minus[0], plus[1]),
                             nodeFor(zero[0], zero[0])};
      emit(tri, dirTowardsPlus(tri));
    } else if (nM == 2 && nP == 1 && nZ == 1) {
      std::array<int, 3> tri{nodeFor(minus[0], plus[0]), nodeFor(minus[1], plus[0]),
                             nodeFor(zero[0], zero[0])};
      emit(tri, dirTowardsPlus(tri));
    } else if (nM == 1 && nP == 3) {
      std::array<int, 3> tri{nodeFor(minus[0], plus[0]), nodeFor(minus[0], plus[1]),
                             nodeFor(minus[0], plus[2])};
      emit(tri, dirTowardsPlus(tri));
    } else if (nM == 3 && nP == 1) {
      std::array<int, 3> tri{nodeFor(minus[0], plus[0]), nodeFor(minus[1], plus[0]),
                             nodeFor(minus[2], plus[0])};
      emit(tri, dirTowardsPlus(tri));
    } else if (nM == 2 && nP == 2) {
      int c00 = nodeFor(minus[0], plus[0]);
      int c01 = nodeFor(minus[0], plus[1]);
      int c10 = nodeFor(minus[1], plus[0]);
      int c11 = nodeFor(minus[1], plus[1]);
      // quad (c00, c01, c11, c10), smallest-id diagonal
      int mn = std::min({c00, c01, c11, c10});
      std::array<int, 3> t1, t2;
      if (mn == c00 || mn == c11) {
        t1 = {c00, c01, c11};
        t2 = {c00, c11, c10};
      } else {
        t1 = {c01, c11, c10};
        t2 = {c01, c10, c00};
      }
      emit(t1, dirTowardsPlus(t1));
      emit(t2, dirTowardsPlus(t2));
    }
  }

  if (tris.empty()) throw NumericError("extractIsosurface: empty surface at isovalue " + std::to_string(isovalue));

  IsoSurface iso;
  iso.surface.nodes.resize(static_cast<Eigen::Index>(positions.size()), 3);
  iso.surface.parentNodes.assign(positions.size(), -1);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    iso.surface.nodes.row(static_cast<Eigen::Index>(i)) = positions[i];
    if (sourceEdges[i][0] == sourceEdges[i][1]) iso.surface.parentNodes[i] = sourceEdges[i][0];
  }
  iso.surface.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    iso.surface.triangles.row(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  }
  iso.sourceEdges = std::move(sourceEdges);
  iso.sourceParams = std::move(sourceParams);
  return iso;
}

ScalarField IsoCurve::interpolate(const ScalarField& surfaceField) const {
  ScalarField out(static_cast<Eigen::Index>(sourceEdges.size()));
  for (std::size_t i = 0; i < sourceEdges.size(); ++i) {
    double t = sourceParams[i];
    out(static_cast<Eigen::Index>(i)) =
        (1.0 - t) * surfaceField(sourceEdges[i][0]) + t * surfaceField(sourceEdges[i][1]);
  }
  return out;
}

std::vector<IsoCurve> extractIsocurves(const SurfaceMesh& surface, const ScalarField& field,
                                       double isovalue) {
  const int n = surface.nNodes();
  if (field.size() != n) throw InputError("extractIsocurves: field size mismatch");

  std::vector<std::int8_t> status(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double d = field(i) - isovalue;
    status[static_cast<std::size_t>(i)] = d < 0 ? -1 : (d > 0 ? 1 : 0);
  }

  using Key = std::pair<int, int>;  // provenance: (i,i) node, sorted (a,b) cut
  auto keyFor = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return Key{a, b};
  };
  std::map<Key, std::vector<Key>> adjacency;
  std::map<std::pair<Key, Key>, char> seenSegments;
  auto addSegment = [&](Key a, Key b) {
    if (a == b) return;
    auto segKey = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (!seenSegments.emplace(segKey, 1).second) return;
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  };

  for (int t = 0; t < surface.nTriangles(); ++t) {
    std::array<int, 3> v{surface.triangles(t, 0), surface.triangles(t, 1), surface.triangles(t, 2)};
    std::vector<int> minus, zero, plus;
    for (int k : v) {
      switch (status[static_cast<std::size_t>(k)]) {
        case -1: minus.push_back(k); break;
        case 0: zero.push_back(k); break;
        default: plus.push_back(k); break;
      }
    }
    if (zero.size() == 2) {
      addSegment(keyFor(zero[0], zero[0]), keyFor(zero[1], zero[1]));
    } else if (zero.size() == 1 && minus.size() == 1 && plus.size() == 1) {
      addSegment(keyFor(zero[0], zero[0]), keyFor(minus[0], plus[0]));
    } else if (zero.empty() && !minus.empty() && !plus.empty()) {
      if (minus.size() == 1) {
        addSegment(keyFor(minus[0], plus[0]), keyFor(minus[0], plus[1]));
      } else {
        addSegment(keyFor(minus[0], plus[0]), keyFor(minus[1], plus[0]));
      }
    }
  }

  auto positionOf = [&](const Key& k) -> Vec3 {
    if (k.first == k.second) return surface.nodes.row(k.first);
    double t = (isovalue - field(k.first)) / (field(k.second) - field(k.first));
    return (1.0 - t) * Vec3(surface.nodes.row(k.first)) + t * Vec3(surface.nodes.row(k.second));
  };
  auto paramOf = [&](const Key& k) {
    if (k.first == k.second) return 0.0;
    return (isovalue - field(k.first)) / (field(k.second) - field(k.first));
  };

  std::map<Key, char> used;
  std::vector<IsoCurve> curves;
  auto walk = [&](const Key& start, bool closedHint) {
    std::vector<Key> chain{start};
    used[start] = 1;
    Key current = start;
    Key previous{-2, -2};
    while (true) {
      const auto& nbrs = adjacency[current];
      Key next{-3, -3};
      bool found = false;
      for (const auto& nb : nbrs) {
        if (nb == previous) continue;
        if (used.count(nb)) continue;
        if (!found || nb < next) {
          next = nb;
          found = true;
        }
      }
      if (!found) break;
      used[next] = 1;
      chain.push_back(next);
      previous = current;
      current = next;
    }
    bool closed = false;
    if (chain.size() > 2) {
      const auto& nbrs = adjacency[chain.back()];
      closed = std::find(nbrs.begin(), nbrs.end(), chain.front()) != nbrs.end();
    }
    (void)closedHint;
    IsoCurve iso;
    iso.curve.points.resize(static_cast<Eigen::Index>(chain.size()), 3);
    iso.curve.closed = closed;
    iso.sourceEdges.reserve(chain.size());
    iso.sourceParams.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
      iso.curve.points.row(static_cast<Eigen::Index>(i)) = positionOf(chain[i]);
      iso.sourceEdges.push_back({chain[i].first, chain[i].second});
      iso.sourceParams.push_back(paramOf(chain[i]));
    }
    curves.push_back(std::move(iso));
  };

  // open chains first, started at their endpoints (degree 1), in key order
  for (const auto& [key, nbrs] : adjacency) {
    if (!used.count(key) && nbrs.size() == 1) walk(key, false);
  }
  for (const auto& [key, nbrs] : adjacency) {
    if (!used.count(key)) walk(key, true);
  }
  return curves;
}

}  // namespace cobiveco
