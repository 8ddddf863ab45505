#pragma once

#include "cobiveco/mesh.hpp"
#include "cobiveco/remesh.hpp"

#include <cmath>
#include <map>
#include <functional>
#include <numbers>
#include <vector>

namespace cobiveco::testing {

// Structured box [0,lx]x[0,ly]x[0,lz], each cell split into conforming tets.
inline TetMesh slabMesh(int nx, int ny, int nz, double lx = 1.0, double ly = 1.0, double lz = 1.0) {
  Points nodes((nx + 1) * (ny + 1) * (nz + 1), 3);
  auto id = [&](int i, int j, int k) { return (i * (ny + 1) + j) * (nz + 1) + k; };
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      for (int k = 0; k <= nz; ++k) {
        nodes.row(id(i, j, k)) << lx * i / nx, ly * j / ny, lz * k / nz;
      }
    }
  }
  std::vector<std::array<int, 4>> tets;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      for (int k = 0; k < nz; ++k) {
        std::array<int, 8> v{id(i, j, k),         id(i + 1, j, k),     id(i + 1, j + 1, k),
                             id(i, j + 1, k),     id(i, j, k + 1),     id(i + 1, j, k + 1),
                             id(i + 1, j + 1, k + 1), id(i, j + 1, k + 1)};
        splitPrismIntoTets({v[0], v[1], v[2]}, {v[4], v[5], v[6]}, tets);
        splitPrismIntoTets({v[0], v[2], v[3]}, {v[4], v[6], v[7]}, tets);
      }
    }
  }
  Tets t(static_cast<Eigen::Index>(tets.size()), 4);
  for (std::size_t e = 0; e < tets.size(); ++e) {
    t.row(static_cast<Eigen::Index>(e)) << tets[e][0], tets[e][1], tets[e][2], tets[e][3];
  }
  return TetMesh(std::move(nodes), std::move(t));
}

// Extruded annulus: radii [r1, r2], height h, periodic in angle.
inline TetMesh annulusMesh(int nr, int nphi, int nz, double r1, double r2, double h) {
  Points nodes((nr + 1) * nphi * (nz + 1), 3);
  auto id = [&](int i, int k, int j) { return (i * nphi + (k % nphi)) * (nz + 1) + j; };
  for (int i = 0; i <= nr; ++i) {
    double r = r1 + (r2 - r1) * i / nr;
    for (int k = 0; k < nphi; ++k) {
      double phi = 2.0 * std::numbers::pi * k / nphi;
      for (int j = 0; j <= nz; ++j) {
        nodes.row(id(i, k, j)) << r * std::cos(phi), r * std::sin(phi), h * j / nz;
      }
    }
  }
  std::vector<std::array<int, 4>> tets;
  for (int i = 0; i < nr; ++i) {
    for (int k = 0; k < nphi; ++k) {
      for (int j = 0; j < nz; ++j) {
        std::array<int, 8> v{id(i, k, j),         id(i + 1, k, j),     id(i + 1, k + 1, j),
                             id(i, k + 1, j),     id(i, k, j + 1),     id(i + 1, k, j + 1),
                             id(i + 1, k + 1, j + 1), id(i, k + 1, j + 1)};
        splitPrismIntoTets({v[0], v[1], v[2]}, {v[4], v[5], v[6]}, tets);
        splitPrismIntoTets({v[0], v[2], v[3]}, {v[4], v[6], v[7]}, tets);
      }
    }
  }
  Tets t(static_cast<Eigen::Index>(tets.size()), 4);
  for (std::size_t e = 0; e < tets.size(); ++e) {
    t.row(static_cast<Eigen::Index>(e)) << tets[e][0], tets[e][1], tets[e][2], tets[e][3];
  }
  return TetMesh(std::move(nodes), std::move(t));
}

// Slab with boundary labels assigned by predicates on the face centroid.
inline TetMesh labeledSlab(
    int nx, int ny, int nz, double lx, double ly, double lz,
    const std::function<SurfaceLabel(const Vec3& faceCentroid)>& classify) {
  TetMesh plain = slabMesh(nx, ny, nz, lx, ly, lz);
  std::vector<std::pair<std::array<int, 3>, SurfaceLabel>> labels;
  for (const auto& bf : plain.boundaryFaces()) {
    Vec3 c = (plain.node(bf.nodes[0]) + plain.node(bf.nodes[1]) + plain.node(bf.nodes[2])) / 3.0;
    SurfaceLabel label = classify(c);
    if (label != SurfaceLabel::None) labels.push_back({bf.nodes, label});
  }
  return TetMesh(plain, labels);
}

inline std::vector<int> nodesWhere(const TetMesh& mesh, const std::function<bool(const Vec3&)>& pred) {
  std::vector<int> out;
  for (int i = 0; i < mesh.nNodes(); ++i) {
    if (pred(mesh.node(i))) out.push_back(i);
  }
  return out;
}

inline ScalarField fieldOf(const TetMesh& mesh, const std::function<double(const Vec3&)>& f) {
  ScalarField out(mesh.nNodes());
  for (int i = 0; i < mesh.nNodes(); ++i) out(i) = f(mesh.node(i));
  return out;
}

// Subdivided-icosahedron sphere: near-uniform triangle sizes, suitable for
// unweighted per-triangle statistics.
inline SurfaceMesh icosphere(int subdivisions, double radius = 1.0) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> pts{{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : pts) p.normalize();
  std::vector<std::array<int, 3>> tris{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10},
                                       {0, 10, 11}, {1, 5, 9},  {5, 11, 4},  {11, 10, 2},
                                       {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
                                       {3, 2, 6},   {3, 6, 8},  {3, 8, 9},   {4, 9, 5},
                                       {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      Vec3 mid = (pts[static_cast<std::size_t>(a)] + pts[static_cast<std::size_t>(b)]).normalized();
      pts.push_back(mid);
      int id = static_cast<int>(pts.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& t : tris) {
      int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  SurfaceMesh surf;
  surf.nodes.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) surf.nodes.row(static_cast<Eigen::Index>(i)) = radius * pts[i];
  surf.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    surf.triangles.row(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  }
  surf.parentNodes.assign(pts.size(), -1);
  return surf;
}

// Latitude-longitude sphere surface (radius r), detached SurfaceMesh.
inline SurfaceMesh sphereSurface(int nLat, int nLon, double r) {
  SurfaceMesh surf;
  std::vector<Vec3> pts;
  pts.push_back({0, 0, -r});
  for (int i = 1; i < nLat; ++i) {
    double theta = std::numbers::pi * i / nLat;
    for (int k = 0; k < nLon; ++k) {
      double phi = 2.0 * std::numbers::pi * k / nLon;
      pts.push_back({r * std::sin(theta) * std::cos(phi), r * std::sin(theta) * std::sin(phi),
                     -r * std::cos(theta)});
    }
  }
  pts.push_back({0, 0, r});
  auto ring = [&](int i, int k) { return 1 + (i - 1) * nLon + (k % nLon); };
  std::vector<std::array<int, 3>> tris;
  for (int k = 0; k < nLon; ++k) tris.push_back({0, ring(1, k + 1), ring(1, k)});
  for (int i = 1; i + 1 < nLat; ++i) {
    for (int k = 0; k < nLon; ++k) {
      tris.push_back({ring(i, k), ring(i, k + 1), ring(i + 1, k + 1)});
      tris.push_back({ring(i, k), ring(i + 1, k + 1), ring(i + 1, k)});
    }
  }
  int top = static_cast<int>(pts.size()) - 1;
  for (int k = 0; k < nLon; ++k) tris.push_back({top, ring(nLat - 1, k), ring(nLat - 1, k + 1)});
  surf.nodes.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) surf.nodes.row(static_cast<Eigen::Index>(i)) = pts[i];
  surf.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    surf.triangles.row(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  }
  surf.parentNodes.assign(pts.size(), -1);
  return surf;
}

}  // namespace cobiveco::testing
