#include "cobiveco/mesh.hpp"

#include "cobiveco/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>
#include <unordered_set>

namespace cobiveco {

namespace {

// Outward-oriented faces of a positively oriented tet, by local index.
constexpr int kTetFaces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

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

std::array<int, 3> sortedTriple(int a, int b, int c) {
  std::array<int, 3> t{a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

}  // namespace

const char* surfaceLabelName(SurfaceLabel label) {
  switch (label) {
    case SurfaceLabel::None: return "None";
    case SurfaceLabel::Base: return "Base";
    case SurfaceLabel::Epi: return "Epi";
    case SurfaceLabel::Lv: return "LV";
    case SurfaceLabel::Rv: return "RV";
  }
  return "None";
}

SurfaceLabel surfaceLabelFromInt(int value) {
  if (value < 0 || value > 4) throw InputError("surface label out of range: " + std::to_string(value));
  return static_cast<SurfaceLabel>(value);
}

double tetSignedVolume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

TetMesh::TetMesh(Points nodes, Tets tets) : nodes_(std::move(nodes)), tets_(std::move(tets)) {
  finalize();
}

TetMesh::TetMesh(Points nodes, Tets tets,
                 const std::vector<std::pair<std::array<int, 3>, SurfaceLabel>>& faceLabels)
    : nodes_(std::move(nodes)), tets_(std::move(tets)) {
  finalize();
  applyFaceLabels(faceLabels);
}

TetMesh::TetMesh(const TetMesh& other,
                 const std::vector<std::pair<std::array<int, 3>, SurfaceLabel>>& faceLabels)
    : TetMesh(other) {
  for (auto& bf : boundaryFaces_) bf.label = SurfaceLabel::None;
  applyFaceLabels(faceLabels);
}

void TetMesh::applyFaceLabels(
    const std::vector<std::pair<std::array<int, 3>, SurfaceLabel>>& faceLabels) {
  std::unordered_map<std::array<int, 3>, int, TripleHash> faceIndex;
  faceIndex.reserve(boundaryFaces_.size());
  for (std::size_t f = 0; f < boundaryFaces_.size(); ++f) {
    const auto& bf = boundaryFaces_[f];
    faceIndex.emplace(sortedTriple(bf.nodes[0], bf.nodes[1], bf.nodes[2]), static_cast<int>(f));
  }
  for (const auto& [triple, label] : faceLabels) {
    auto it = faceIndex.find(sortedTriple(triple[0], triple[1], triple[2]));
    if (it == faceIndex.end()) {
      throw InputError("TetMesh: labeled face (" + std::to_string(triple[0]) + "," +
                       std::to_string(triple[1]) + "," + std::to_string(triple[2]) +
                       ") is not a boundary face");
    }
    boundaryFaces_[static_cast<std::size_t>(it->second)].label = label;
  }
}

void TetMesh::finalize() {
  const int n = nNodes();
  const int m = nTets();
  if (n < 4 || m < 1) throw InputError("TetMesh: needs at least 4 nodes and 1 tet");
  for (int e = 0; e < m; ++e) {
    for (int k = 0; k < 4; ++k) {
      int v = tets_(e, k);
      if (v < 0 || v >= n) {
        throw InputError("TetMesh: node index out of range in tet " + std::to_string(e));
      }
    }
  }

  // Mean edge length over unique edges.
  std::unordered_set<std::uint64_t> edges;
  edges.reserve(static_cast<std::size_t>(m) * 6);
  double edgeSum = 0.0;
  auto edgeKey = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };
  for (int e = 0; e < m; ++e) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        int a = tets_(e, i), b = tets_(e, j);
        if (a == b) throw InputError("TetMesh: repeated node in tet " + std::to_string(e));
        if (edges.insert(edgeKey(a, b)).second) {
          edgeSum += (nodes_.row(a) - nodes_.row(b)).norm();
        }
      }
    }
  }
  meanEdgeLength_ = edgeSum / static_cast<double>(edges.size());

  const double volFloor = 1e-12 * meanEdgeLength_ * meanEdgeLength_ * meanEdgeLength_;
  tetVolumes_.resize(m);
  for (int e = 0; e < m; ++e) {
    double v = tetSignedVolume(nodes_.row(tets_(e, 0)), nodes_.row(tets_(e, 1)),
                               nodes_.row(tets_(e, 2)), nodes_.row(tets_(e, 3)));
    if (v < 0) {
      std::swap(tets_(e, 2), tets_(e, 3));
      v = -v;
    }
    if (v < volFloor) {
      throw NumericError("TetMesh: degenerate tet " + std::to_string(e) + " (volume " +
                         std::to_string(v) + " below floor " + std::to_string(volFloor) + ")");
    }
    tetVolumes_(e) = v;
  }

  // Boundary faces = faces incident to exactly one tet; interior faces pair up.
  struct FaceRec {
    int tet;
    int localFace;
    int count;
    int otherTet;
  };
  std::unordered_map<std::array<int, 3>, FaceRec, TripleHash> faces;
  faces.reserve(static_cast<std::size_t>(m) * 2);
  for (int e = 0; e < m; ++e) {
    for (int f = 0; f < 4; ++f) {
      auto key = sortedTriple(tets_(e, kTetFaces[f][0]), tets_(e, kTetFaces[f][1]),
                              tets_(e, kTetFaces[f][2]));
      auto [it, inserted] = faces.try_emplace(key, FaceRec{e, f, 1, -1});
      if (!inserted) {
        it->second.count += 1;
        it->second.otherTet = e;
        if (it->second.count > 2) {
          throw InputError("TetMesh: face shared by more than two tets (non-manifold)");
        }
      }
    }
  }

  faceNeighbors_.assign(static_cast<std::size_t>(m), {-1, -1, -1, -1});
  std::vector<std::array<int, 2>> boundary;  // (tet, localFace), collected then sorted
  for (const auto& [key, rec] : faces) {
    if (rec.count == 1) {
      boundary.push_back({rec.tet, rec.localFace});
    } else {
      // mutual neighbor entries; local face slot of the second tet found by lookup
      for (int f = 0; f < 4; ++f) {
        auto k2 = sortedTriple(tets_(rec.otherTet, kTetFaces[f][0]),
                               tets_(rec.otherTet, kTetFaces[f][1]),
                               tets_(rec.otherTet, kTetFaces[f][2]));
        if (k2 == key) {
          faceNeighbors_[static_cast<std::size_t>(rec.otherTet)][f] = rec.tet;
          break;
        }
      }
      faceNeighbors_[static_cast<std::size_t>(rec.tet)][rec.localFace] = rec.otherTet;
    }
  }
  std::sort(boundary.begin(), boundary.end());
  boundaryFaces_.reserve(boundary.size());
  for (const auto& [e, f] : boundary) {
    BoundaryFace bf;
    bf.nodes = {tets_(e, kTetFaces[f][0]), tets_(e, kTetFaces[f][1]), tets_(e, kTetFaces[f][2])};
    bf.tet = e;
    boundaryFaces_.push_back(bf);
  }
}

Vec3 TetMesh::tetCentroid(int e) const {
  return (nodes_.row(tets_(e, 0)) + nodes_.row(tets_(e, 1)) + nodes_.row(tets_(e, 2)) +
          nodes_.row(tets_(e, 3))) /
         4.0;
}

std::vector<int> TetMesh::labelNodes(std::initializer_list<SurfaceLabel> labels) const {
  return labelNodes(std::set<SurfaceLabel>(labels));
}

std::vector<int> TetMesh::labelNodes(const std::set<SurfaceLabel>& labels) const {
  std::vector<char> mark(static_cast<std::size_t>(nNodes()), 0);
  for (const auto& bf : boundaryFaces_) {
    if (labels.count(bf.label)) {
      for (int v : bf.nodes) mark[static_cast<std::size_t>(v)] = 1;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < nNodes(); ++i) {
    if (mark[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

SurfaceMesh TetMesh::extractSurface(const std::set<SurfaceLabel>& labels) const {
  std::vector<const BoundaryFace*> selected;
  for (const auto& bf : boundaryFaces_) {
    if (labels.count(bf.label)) selected.push_back(&bf);
  }
  if (selected.empty()) {
    std::string names;
    for (auto l : labels) names += std::string(names.empty() ? "" : ",") + surfaceLabelName(l);
    throw InputError("extractSurface: no boundary faces with label(s) {" + names + "}");
  }
  SurfaceMesh surf;
  std::vector<int> globalToLocal(static_cast<std::size_t>(nNodes()), -1);
  std::vector<int> localNodes;
  surf.triangles.resize(static_cast<Eigen::Index>(selected.size()), 3);
  for (std::size_t t = 0; t < selected.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int g = selected[t]->nodes[static_cast<std::size_t>(k)];
      int& l = globalToLocal[static_cast<std::size_t>(g)];
      if (l < 0) {
        l = static_cast<int>(localNodes.size());
        localNodes.push_back(g);
      }
      surf.triangles(static_cast<Eigen::Index>(t), k) = l;
    }
  }
  surf.nodes.resize(static_cast<Eigen::Index>(localNodes.size()), 3);
  surf.parentNodes.resize(localNodes.size());
  for (std::size_t i = 0; i < localNodes.size(); ++i) {
    surf.nodes.row(static_cast<Eigen::Index>(i)) = nodes_.row(localNodes[i]);
    surf.parentNodes[i] = localNodes[i];
  }
  return surf;
}

Eigen::AlignedBox3d TetMesh::boundingBox() const {
  Eigen::AlignedBox3d box;
  for (int i = 0; i < nNodes(); ++i) box.extend(Vec3(nodes_.row(i)));
  return box;
}

Vec3 SurfaceMesh::triangleNormal(int t) const {
  Vec3 a = nodes.row(triangles(t, 0));
  Vec3 b = nodes.row(triangles(t, 1));
  Vec3 c = nodes.row(triangles(t, 2));
  return 0.5 * (b - a).cross(c - a);
}

Vec3 SurfaceMesh::centroid() const {
  Vec3 acc = Vec3::Zero();
  double areaSum = 0.0;
  for (int t = 0; t < nTriangles(); ++t) {
    double a = triangleNormal(t).norm();
    Vec3 c = (nodes.row(triangles(t, 0)) + nodes.row(triangles(t, 1)) + nodes.row(triangles(t, 2))) / 3.0;
    acc += a * c;
    areaSum += a;
  }
  if (areaSum <= 0.0) throw NumericError("SurfaceMesh::centroid: zero total area");
  return acc / areaSum;
}

double SurfaceMesh::area() const {
  double s = 0.0;
  for (int t = 0; t < nTriangles(); ++t) s += triangleNormal(t).norm();
  return s;
}

double Curve::length() const {
  double s = 0.0;
  for (int i = 0; i + 1 < nPoints(); ++i) s += (points.row(i + 1) - points.row(i)).norm();
  if (closed && nPoints() > 1) s += (points.row(0) - points.row(nPoints() - 1)).norm();
  return s;
}

std::vector<int> connectedComponents(const SurfaceMesh& surface, int* nComponents) {
  const int n = surface.nNodes();
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  };
  for (int t = 0; t < surface.nTriangles(); ++t) {
    unite(surface.triangles(t, 0), surface.triangles(t, 1));
    unite(surface.triangles(t, 1), surface.triangles(t, 2));
  }
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (labels[static_cast<std::size_t>(r)] < 0) labels[static_cast<std::size_t>(r)] = count++;
    labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(r)];
  }
  if (nComponents) *nComponents = count;
  return labels;
}

SurfaceMesh surfaceSubset(const SurfaceMesh& surface, const std::vector<char>& keepNode) {
  SurfaceMesh out;
  std::vector<int> remap(static_cast<std::size_t>(surface.nNodes()), -1);
  std::vector<int> kept;
  std::vector<std::array<int, 3>> tris;
  for (int t = 0; t < surface.nTriangles(); ++t) {
    std::array<int, 3> tri{surface.triangles(t, 0), surface.triangles(t, 1), surface.triangles(t, 2)};
    bool all = true;
    for (int v : tri) all = all && keepNode[static_cast<std::size_t>(v)];
    if (!all) continue;
    for (int& v : tri) {
      if (remap[static_cast<std::size_t>(v)] < 0) {
        remap[static_cast<std::size_t>(v)] = static_cast<int>(kept.size());
        kept.push_back(v);
      }
      v = remap[static_cast<std::size_t>(v)];
    }
    tris.push_back(tri);
  }
  out.nodes.resize(static_cast<Eigen::Index>(kept.size()), 3);
  out.parentNodes.resize(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.nodes.row(static_cast<Eigen::Index>(i)) = surface.nodes.row(kept[i]);
    out.parentNodes[i] = surface.parentNodes.empty() ? -1 : surface.parentNodes[static_cast<std::size_t>(kept[i])];
  }
  out.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    out.triangles.row(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  }
  return out;
}

int countBoundaryLoops(const SurfaceMesh& surface) {
  std::unordered_map<std::uint64_t, int> edgeCount;
  auto key = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };
  for (int t = 0; t < surface.nTriangles(); ++t) {
    for (int k = 0; k < 3; ++k) {
      edgeCount[key(surface.triangles(t, k), surface.triangles(t, (k + 1) % 3))] += 1;
    }
  }
  // union-find over boundary edges; loops = components of the boundary-edge graph
  std::unordered_map<int, int> parent;
  std::function<int(int)> find = [&](int x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  int nBoundaryNodes = 0, nBoundaryEdges = 0;
  for (const auto& [k, c] : edgeCount) {
    if (c != 1) continue;
    int a = static_cast<int>(k >> 32);
    int b = static_cast<int>(k & 0xffffffffu);
    if (parent.find(a) == parent.end()) ++nBoundaryNodes;
    if (parent.find(b) == parent.end()) ++nBoundaryNodes;
    int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    ++nBoundaryEdges;
  }
  std::unordered_set<int> roots;
  for (const auto& [k, v] : parent) roots.insert(find(k));
  (void)nBoundaryNodes;
  (void)nBoundaryEdges;
  return static_cast<int>(roots.size());
}

}  // namespace cobiveco
