#include "cobiveco/phantom.hpp"

#include "cobiveco/errors.hpp"
#include "cobiveco/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_set>

namespace cobiveco {

namespace {

constexpr double kPi = std::numbers::pi;

// node patch tags, combined by bitmask
enum Tag : std::uint8_t {
  kTagInner = 1,   // LV endocardium / shell inner surface
  kTagBase = 2,    // z = 0 truncation
  kTagCavity = 4,  // RV endocardium (septal sheet and free sheet)
  kTagEpi = 8,
  kTagLat1 = 16,  // shell lateral cuts
  kTagLat2 = 32,
};

struct LatticeMesh {
  std::vector<Vec3> nodes;
  std::vector<std::uint8_t> tags;
  std::vector<std::array<int, 4>> tets;

  int addNode(const Vec3& p, std::uint8_t tag) {
    nodes.push_back(p);
    tags.push_back(tag);
    return static_cast<int>(nodes.size()) - 1;
  }

  // hexahedron (a0..a3 lower layer, b0..b3 upper layer, fixed diagonal a0-a2)
  void addHexa(const std::array<int, 8>& v) {
    splitPrismIntoTets({v[0], v[1], v[2]}, {v[4], v[5], v[6]}, tets);
    splitPrismIntoTets({v[0], v[2], v[3]}, {v[4], v[6], v[7]}, tets);
  }

  void addPrism(const std::array<int, 3>& u, const std::array<int, 3>& w) {
    splitPrismIntoTets(u, w, tets);
  }

  TetMesh build(SurfaceLabel innerLabel, SurfaceLabel lat1Label, SurfaceLabel lat2Label) const {
    Points pts(static_cast<Eigen::Index>(nodes.size()), 3);
    for (std::size_t i = 0; i < nodes.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = nodes[i];
    Tets t(static_cast<Eigen::Index>(tets.size()), 4);
    for (std::size_t e = 0; e < tets.size(); ++e) {
      t.row(static_cast<Eigen::Index>(e)) << tets[e][0], tets[e][1], tets[e][2], tets[e][3];
    }
    TetMesh mesh(std::move(pts), std::move(t));
    // label precedence: Base, inner, cavity, epi
    std::vector<std::pair<std::array<int, 3>, SurfaceLabel>> labels;
    for (const auto& bf : mesh.boundaryFaces()) {
      std::uint8_t common = tags[static_cast<std::size_t>(bf.nodes[0])] &
                            tags[static_cast<std::size_t>(bf.nodes[1])] &
                            tags[static_cast<std::size_t>(bf.nodes[2])];
      SurfaceLabel label = SurfaceLabel::None;
      if (common & kTagBase) {
        label = SurfaceLabel::Base;
      } else if (common & kTagInner) {
        label = innerLabel;
      } else if (common & kTagLat1) {
        label = lat1Label;
      } else if (common & kTagLat2) {
        label = lat2Label;
      } else if (common & kTagCavity) {
        label = SurfaceLabel::Rv;
      } else if (common & kTagEpi) {
        label = SurfaceLabel::Epi;
      }
      if (label != SurfaceLabel::None) labels.push_back({bf.nodes, label});
    }
    return TetMesh(mesh, labels);
  }
};

Vec3 ellipsoidPoint(double a, double b, double c, double phi, double theta) {
  return {a * std::sin(theta) * std::cos(phi), b * std::sin(theta) * std::sin(phi),
          -c * std::cos(theta)};
}

Vec3 ellipsoidNormal(double a, double b, double c, const Vec3& p) {
  Vec3 n(p.x() / (a * a), p.y() / (b * b), p.z() / (c * c));
  return n.normalized();
}

double resolutionScale(int resolution, int reference) {
  return std::pow(2.0, static_cast<double>(resolution - reference) / 3.0);
}

}  // namespace

namespace {
double shellThickness(ShellKind kind, const ShellParams& params, double phi) {
  if (kind == ShellKind::Uniform) return params.thickness;
  double mid = 0.5 * (params.nonuniformMin + params.nonuniformMax);
  double amp = 0.5 * (params.nonuniformMax - params.nonuniformMin);
  // thin at phi = 0 and pi, thick at pi/2
  return params.thickness * (mid - amp * std::cos(2.0 * phi));
}
}  // namespace

double ShellPhantom::thicknessAt(double phi) const {
  return shellThickness(kind, params, phi);
}

ShellPhantom ellipsoidShell(ShellKind kind, int resolution, const ShellParams& params) {
  if (resolution < 1) throw InputError("ellipsoidShell: resolution must be >= 1");
  const double u = resolutionScale(resolution, 1);
  const int nPhi = std::max(24, static_cast<int>(std::lround(60 * u)));
  const int nTheta = std::max(10, static_cast<int>(std::lround(20 * u)));
  const int nS = std::max(2, static_cast<int>(std::lround(3 * u)));

  LatticeMesh lattice;
  const double theta0 = params.thetaStart;
  const double theta1 = 0.5 * kPi;
  // node ids: [s][k][j]
  std::vector<int> ids(static_cast<std::size_t>((nS + 1) * (nPhi + 1) * (nTheta + 1)));
  auto id = [&](int s, int k, int j) -> int& {
    return ids[static_cast<std::size_t>((s * (nPhi + 1) + k) * (nTheta + 1) + j)];
  };
  for (int s = 0; s <= nS; ++s) {
    for (int k = 0; k <= nPhi; ++k) {
      double phi = kPi * static_cast<double>(k) / nPhi;
      double t = shellThickness(kind, params, phi) * static_cast<double>(s) / nS;
      for (int j = 0; j <= nTheta; ++j) {
        double theta = theta0 + (theta1 - theta0) * static_cast<double>(j) / nTheta;
        Vec3 e = ellipsoidPoint(params.semiA, params.semiB, params.semiC, phi, theta);
        Vec3 n = ellipsoidNormal(params.semiA, params.semiB, params.semiC, e);
        std::uint8_t tag = 0;
        if (s == 0) tag |= kTagInner;
        if (s == nS) tag |= kTagEpi;
        if (k == 0) tag |= kTagLat1;
        if (k == nPhi) tag |= kTagLat2;
        // rim (z = 0) and lower cut stay unlabeled
        id(s, k, j) = lattice.addNode(e + t * n, tag);
      }
    }
  }
  for (int s = 0; s < nS; ++s) {
    for (int k = 0; k < nPhi; ++k) {
      for (int j = 0; j < nTheta; ++j) {
        lattice.addHexa({id(s, k, j), id(s, k + 1, j), id(s, k + 1, j + 1), id(s, k, j + 1),
                         id(s + 1, k, j), id(s + 1, k + 1, j), id(s + 1, k + 1, j + 1),
                         id(s + 1, k, j + 1)});
      }
    }
  }
  std::vector<int> ring;
  int jMid = nTheta / 2;
  for (int k = 0; k <= nPhi; ++k) ring.push_back(id(nS, k, jMid));
  return ShellPhantom{lattice.build(SurfaceLabel::Base, SurfaceLabel::Lv, SurfaceLabel::Rv),
                      std::move(ring), kind, params};
}

TetMesh biventricularPhantom(const BivPhantomParams& params, int resolution) {
  if (resolution < 1) throw InputError("biventricularPhantom: resolution must be >= 1");
  if (params.lvWall <= 0 || params.rvWall <= 0 || params.rvGapMax <= 0 || params.scale <= 0) {
    throw InputError("biventricularPhantom: thicknesses, gap and scale must be positive");
  }
  if (params.nonuniformWall && params.wallVariation >= params.lvWall) {
    throw InputError("biventricularPhantom: wall variation exceeds the wall thickness");
  }
  if (params.rvWedgeEndDeg <= params.rvWedgeStartDeg ||
      params.rvWedgeEndDeg - params.rvWedgeStartDeg >= 360.0) {
    throw InputError("biventricularPhantom: invalid RV wedge span");
  }
  if (params.rvThetaStart <= 0.05 || params.rvThetaStart >= 0.9) {
    throw InputError("biventricularPhantom: rvThetaStart outside (0.05, 0.9)");
  }

  const double u = resolutionScale(resolution, 5);
  const int nPhiBase = std::max(3, static_cast<int>(std::lround(100.0 * u / 8.0))) * 8;
  const int nTheta = std::max(12, static_cast<int>(std::lround(76 * u)));
  const int nL = std::max(2, static_cast<int>(std::lround(8 * u)));
  const int nR = std::max(2, static_cast<int>(std::lround(4 * u)));

  const double a = params.lvEndoA, b = params.lvEndoB, c = params.lvEndoC;
  const double phi0 = params.rvWedgeStartDeg * kPi / 180.0;
  const double phi1 = params.rvWedgeEndDeg * kPi / 180.0;
  const int j0 = std::clamp(static_cast<int>(std::lround(params.rvThetaStart * nTheta)), 2, nTheta - 3);

  auto thetaOf = [&](int j) { return 0.5 * kPi * static_cast<double>(j) / nTheta; };

  // Azimuthal counts halve towards the pole so triangle sizes stay roughly
  // uniform; at most one halving between consecutive rings.
  std::vector<int> nPhi(static_cast<std::size_t>(nTheta + 1), nPhiBase);
  std::vector<int> level(static_cast<std::size_t>(nTheta + 1), 0);
  for (int j = nTheta - 1; j >= 1; --j) {
    double s = std::sin(thetaOf(j));
    int raw = s * 1.6 >= 1.0 ? 0 : static_cast<int>(std::floor(-std::log2(s * 1.6)));
    raw = std::clamp(raw, 0, 3);
    level[static_cast<std::size_t>(j)] =
        std::clamp(raw, level[static_cast<std::size_t>(j + 1)], level[static_cast<std::size_t>(j + 1)] + 1);
    nPhi[static_cast<std::size_t>(j)] = nPhiBase >> level[static_cast<std::size_t>(j)];
  }

  auto wallThickness = [&](double phi, double theta) {
    if (!params.nonuniformWall) return params.lvWall;
    double ramp = std::sin(theta);
    double phiMid = 0.5 * (phi0 + phi1);
    // thin opposite the RV, thick under it (one full cycle around)
    return params.lvWall + params.wallVariation * ramp * ramp * std::cos(phi - phiMid);
  };

  // Cavity gap profile: an exact-zero margin of ~1.35 local cells along the
  // wedge edges and below the starting ring keeps whole welded cells between
  // the cavity and the epicardium, so the junction stays interior to the
  // myocardium.
  const double thetaRv = thetaOf(j0 + 1);
  const double thetaBase = 0.5 * kPi;
  auto cavityGap = [&](double phi, int j) {
    if (j <= j0 + 1 || j > nTheta) return 0.0;
    double width = 2.0 * kPi / nPhi[static_cast<std::size_t>(j)];
    if (j > 1) width = std::max(width, 2.0 * kPi / nPhi[static_cast<std::size_t>(j - 1)]);
    double margin = 1.35 * width;
    double lo = phi0 + margin, hi = phi1 - margin;
    if (phi <= lo || phi >= hi) return 0.0;
    double w = std::sin(kPi * (phi - lo) / (hi - lo));
    double theta = thetaOf(j);
    double h = std::sin(0.5 * kPi * (theta - thetaRv) / (thetaBase - thetaRv));
    return params.rvGapMax * w * h;
  };

  LatticeMesh lattice;
  std::vector<int> pole(static_cast<std::size_t>(nL + 1));
  for (int s = 0; s <= nL; ++s) {
    double t = wallThickness(0.0, 0.0) * static_cast<double>(s) / nL;
    std::uint8_t tag = 0;
    if (s == 0) tag |= kTagInner;
    if (s == nL) tag |= kTagEpi;
    pole[static_cast<std::size_t>(s)] = lattice.addNode(Vec3(0, 0, -(c + t)), tag);
  }

  // LV ring nodes, ragged per ring
  std::vector<int> ringOffset(static_cast<std::size_t>(nTheta + 2), 0);
  for (int j = 1; j <= nTheta; ++j) {
    ringOffset[static_cast<std::size_t>(j + 1)] =
        ringOffset[static_cast<std::size_t>(j)] + nPhi[static_cast<std::size_t>(j)];
  }
  const int ringTotal = ringOffset[static_cast<std::size_t>(nTheta + 1)];
  std::vector<int> lvIds(static_cast<std::size_t>((nL + 1) * ringTotal));
  auto phiAt = [&](int j, int k) {
    int n = nPhi[static_cast<std::size_t>(j)];
    return 2.0 * kPi * static_cast<double>(((k % n) + n) % n) / n;
  };
  auto lvId = [&](int s, int j, int k) -> int& {
    int n = nPhi[static_cast<std::size_t>(j)];
    int kk = ((k % n) + n) % n;
    return lvIds[static_cast<std::size_t>(s * ringTotal + ringOffset[static_cast<std::size_t>(j)] + kk)];
  };

  for (int s = 0; s <= nL; ++s) {
    for (int j = 1; j <= nTheta; ++j) {
      double theta = thetaOf(j);
      for (int k = 0; k < nPhi[static_cast<std::size_t>(j)]; ++k) {
        double phi = phiAt(j, k);
        Vec3 e = ellipsoidPoint(a, b, c, phi, theta);
        Vec3 n = ellipsoidNormal(a, b, c, e);
        double t = wallThickness(phi, theta) * static_cast<double>(s) / nL;
        std::uint8_t tag = 0;
        if (s == 0) tag |= kTagInner;
        if (j == nTheta) tag |= kTagBase;
        if (s == nL) {
          double gap = cavityGap(phi, j);
          bool nearCavity = false;
          double dphi = 1.1 * 2.0 * kPi / nPhi[static_cast<std::size_t>(j)];
          for (int dj = -1; dj <= 1 && !nearCavity; ++dj) {
            int jj = std::clamp(j + dj, 1, nTheta);
            for (int dk = -1; dk <= 1 && !nearCavity; ++dk) {
              nearCavity = cavityGap(phi + dk * dphi, jj) > 0.0;
            }
          }
          if (nearCavity) tag |= kTagCavity;
          if (gap == 0.0) tag |= kTagEpi;
        }
        lvId(s, j, k) = lattice.addNode(e + t * n, tag);
      }
    }
  }

  // cap fan and ring bands, extruded through the LV wall layers
  for (int s = 0; s < nL; ++s) {
    for (int k = 0; k < nPhi[1]; ++k) {
      lattice.addPrism({pole[static_cast<std::size_t>(s)], lvId(s, 1, k), lvId(s, 1, k + 1)},
                       {pole[static_cast<std::size_t>(s + 1)], lvId(s + 1, 1, k), lvId(s + 1, 1, k + 1)});
    }
    for (int j = 1; j < nTheta; ++j) {
      int nC = nPhi[static_cast<std::size_t>(j)];
      int nF = nPhi[static_cast<std::size_t>(j + 1)];
      if (nC == nF) {
        for (int k = 0; k < nC; ++k) {
          lattice.addHexa({lvId(s, j, k), lvId(s, j, k + 1), lvId(s, j + 1, k + 1), lvId(s, j + 1, k),
                           lvId(s + 1, j, k), lvId(s + 1, j, k + 1), lvId(s + 1, j + 1, k + 1),
                           lvId(s + 1, j + 1, k)});
        }
      } else {  // nF == 2 nC: three transition prisms per coarse cell
        for (int k = 0; k < nC; ++k) {
          const std::array<std::array<int, 3>, 3> tris{{
              {lvId(s, j, k), lvId(s, j + 1, 2 * k), lvId(s, j + 1, 2 * k + 1)},
              {lvId(s, j, k), lvId(s, j + 1, 2 * k + 1), lvId(s, j, k + 1)},
              {lvId(s, j, k + 1), lvId(s, j + 1, 2 * k + 1), lvId(s, j + 1, 2 * k + 2)},
          }};
          const std::array<std::array<int, 3>, 3> trisUp{{
              {lvId(s + 1, j, k), lvId(s + 1, j + 1, 2 * k), lvId(s + 1, j + 1, 2 * k + 1)},
              {lvId(s + 1, j, k), lvId(s + 1, j + 1, 2 * k + 1), lvId(s + 1, j, k + 1)},
              {lvId(s + 1, j, k + 1), lvId(s + 1, j + 1, 2 * k + 1), lvId(s + 1, j + 1, 2 * k + 2)},
          }};
          for (int t = 0; t < 3; ++t) lattice.addPrism(tris[static_cast<std::size_t>(t)], trisUp[static_cast<std::size_t>(t)]);
        }
      }
    }
  }

  // RV shell: sheets over the wedge cells, welded where the gap vanishes
  std::vector<int> rvIds(static_cast<std::size_t>((nR + 1) * ringTotal), -1);
  auto rvId = [&](int sr, int j, int k) -> int& {
    int n = nPhi[static_cast<std::size_t>(j)];
    int kk = ((k % n) + n) % n;
    return rvIds[static_cast<std::size_t>(sr * ringTotal + ringOffset[static_cast<std::size_t>(j)] + kk)];
  };
  auto rvNode = [&](int sr, int j, int k) {
    int& id = rvId(sr, j, k);
    if (id >= 0) return id;
    double phi = phiAt(j, k);
    double gap = cavityGap(phi, j);
    if (sr == 0 && gap == 0.0) {
      id = lvId(nL, j, k);  // weld onto the LV epicardium
      return id;
    }
    double theta = thetaOf(j);
    Vec3 e = ellipsoidPoint(a, b, c, phi, theta);
    Vec3 n = ellipsoidNormal(a, b, c, e);
    double offset = wallThickness(phi, theta) + gap + params.rvWall * static_cast<double>(sr) / nR;
    std::uint8_t tag = 0;
    if (sr == 0) tag |= kTagCavity;
    if (sr == nR || gap == 0.0) tag |= kTagEpi;  // outer sheet or over the welded margin
    if (j == nTheta) tag |= kTagBase;
    id = lattice.addNode(e + offset * n, tag);
    return id;
  };
  auto inWedge = [&](double phi) { return phi >= phi0 - 1e-9 && phi <= phi1 + 1e-9; };
  for (int sr = 0; sr < nR; ++sr) {
    for (int j = j0; j < nTheta; ++j) {
      int nC = nPhi[static_cast<std::size_t>(j)];
      int nF = nPhi[static_cast<std::size_t>(j + 1)];
      if (nC == nF) {
        for (int k = 0; k < nC; ++k) {
          double mid = 0.5 * (phiAt(j, k) + phiAt(j, k + 1) + (k + 1 == nC ? 2.0 * kPi : 0.0));
          if (!inWedge(mid)) continue;
          lattice.addHexa({rvNode(sr, j, k), rvNode(sr, j, k + 1), rvNode(sr, j + 1, k + 1),
                           rvNode(sr, j + 1, k), rvNode(sr + 1, j, k), rvNode(sr + 1, j, k + 1),
                           rvNode(sr + 1, j + 1, k + 1), rvNode(sr + 1, j + 1, k)});
        }
      } else {
        for (int k = 0; k < nC; ++k) {
          double mid = 0.5 * (phiAt(j, k) + phiAt(j, k + 1) + (k + 1 == nC ? 2.0 * kPi : 0.0));
          if (!inWedge(mid)) continue;
          const std::array<std::array<std::array<int, 3>, 3>, 2> tris{{
              {{{rvNode(sr, j, k), rvNode(sr, j + 1, 2 * k), rvNode(sr, j + 1, 2 * k + 1)},
                {rvNode(sr, j, k), rvNode(sr, j + 1, 2 * k + 1), rvNode(sr, j, k + 1)},
                {rvNode(sr, j, k + 1), rvNode(sr, j + 1, 2 * k + 1), rvNode(sr, j + 1, 2 * k + 2)}}},
              {{{rvNode(sr + 1, j, k), rvNode(sr + 1, j + 1, 2 * k), rvNode(sr + 1, j + 1, 2 * k + 1)},
                {rvNode(sr + 1, j, k), rvNode(sr + 1, j + 1, 2 * k + 1), rvNode(sr + 1, j, k + 1)},
                {rvNode(sr + 1, j, k + 1), rvNode(sr + 1, j + 1, 2 * k + 1),
                 rvNode(sr + 1, j + 1, 2 * k + 2)}}},
          }};
          for (int t = 0; t < 3; ++t) {
            lattice.addPrism(tris[0][static_cast<std::size_t>(t)], tris[1][static_cast<std::size_t>(t)]);
          }
        }
      }
    }
  }

  TetMesh mesh = lattice.build(SurfaceLabel::Lv, SurfaceLabel::None, SurfaceLabel::None);

  // optional deterministic interior jitter
  Points nodes = mesh.nodes();
  if (params.seed > 0) {
    std::vector<char> boundary(static_cast<std::size_t>(mesh.nNodes()), 0);
    for (const auto& bf : mesh.boundaryFaces()) {
      for (int v : bf.nodes) boundary[static_cast<std::size_t>(v)] = 1;
    }
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const double amp = params.jitterAmplitude * params.lvWall / nL;
    for (int i = 0; i < mesh.nNodes(); ++i) {
      Vec3 d(dist(rng), dist(rng), dist(rng));
      if (!boundary[static_cast<std::size_t>(i)]) nodes.row(i) += amp * d.transpose();
    }
  }
  for (int i = 0; i < mesh.nNodes(); ++i) {
    nodes.row(i) = (params.scale * (params.rotation * Vec3(nodes.row(i))) + params.translation).transpose();
  }

  std::vector<std::pair<std::array<int, 3>, SurfaceLabel>> labels;
  for (const auto& bf : mesh.boundaryFaces()) {
    if (bf.label != SurfaceLabel::None) labels.push_back({bf.nodes, bf.label});
  }
  return TetMesh(std::move(nodes), mesh.tets(), labels);
}

void validatePipelineInput(const TetMesh& mesh) {
  for (SurfaceLabel label : {SurfaceLabel::Base, SurfaceLabel::Epi, SurfaceLabel::Lv, SurfaceLabel::Rv}) {
    auto nodes = mesh.labelNodes({label});
    if (nodes.empty()) {
      throw InputError(std::string("validatePipelineInput: no boundary faces labeled ") + surfaceLabelName(label));
    }
  }
  for (SurfaceLabel label : {SurfaceLabel::Lv, SurfaceLabel::Rv}) {
    SurfaceMesh surf = mesh.extractSurface({label});
    int nComp = 0;
    connectedComponents(surf, &nComp);
    if (nComp != 1) {
      throw InputError(std::string("validatePipelineInput: ") + surfaceLabelName(label) +
                       " endocardium has " + std::to_string(nComp) + " components (want 1)");
    }
    int loops = countBoundaryLoops(surf);
    if (loops != 1) {
      throw InputError(std::string("validatePipelineInput: ") + surfaceLabelName(label) +
                       " endocardium has " + std::to_string(loops) +
                       " boundary loops (want exactly one basal orifice)");
    }
  }
}

}  // namespace cobiveco
