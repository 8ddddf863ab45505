#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cobiveco/errors.hpp"
#include "cobiveco/phantom.hpp"
#include "support.hpp"

#include <numbers>

using namespace cobiveco;

namespace {

// nearest outer-surface node distance, sampled over inner-surface nodes
std::pair<double, double> thicknessRange(const TetMesh& mesh, int samples) {
  auto inner = mesh.labelNodes({SurfaceLabel::Base});   // shell inner surface
  auto outer = mesh.labelNodes({SurfaceLabel::Epi});
  REQUIRE(!inner.empty());
  REQUIRE(!outer.empty());
  double lo = 1e300, hi = 0.0;
  int stride = std::max<std::size_t>(1, inner.size() / samples);
  for (std::size_t s = 0; s < inner.size(); s += stride) {
    Vec3 p = mesh.node(inner[s]);
    double best = 1e300;
    for (int o : outer) best = std::min(best, (mesh.node(o) - p).norm());
    lo = std::min(lo, best);
    hi = std::max(hi, best);
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("uniform shell has constant thickness") {
  ShellPhantom shell = ellipsoidShell(ShellKind::Uniform, 1);
  auto [lo, hi] = thicknessRange(shell.mesh, 100);
  CHECK(hi / lo < 1.02);
  CHECK(lo == doctest::Approx(8.0).epsilon(0.02));
}

TEST_CASE("nonuniform shell thickness ratio is at least 3") {
  ShellPhantom shell = ellipsoidShell(ShellKind::Nonuniform, 2);
  auto [lo, hi] = thicknessRange(shell.mesh, 200);
  CHECK(hi / lo >= 3.0);
}

TEST_CASE("shell lateral boundary surfaces are disjoint and nonempty") {
  ShellPhantom shell = ellipsoidShell(ShellKind::Uniform, 1);
  auto s1 = shell.mesh.labelNodes({SurfaceLabel::Lv});
  auto s2 = shell.mesh.labelNodes({SurfaceLabel::Rv});
  CHECK(!s1.empty());
  CHECK(!s2.empty());
  std::vector<int> both;
  std::set_intersection(s1.begin(), s1.end(), s2.begin(), s2.end(), std::back_inserter(both));
  CHECK(both.empty());
}

TEST_CASE("shell mid ring is ordered along the outer surface") {
  ShellPhantom shell = ellipsoidShell(ShellKind::Uniform, 1);
  REQUIRE(shell.outerMidRing.size() > 10);
  for (std::size_t i = 0; i + 1 < shell.outerMidRing.size(); ++i) {
    double step = (shell.mesh.node(shell.outerMidRing[i + 1]) -
                   shell.mesh.node(shell.outerMidRing[i]))
                      .norm();
    CHECK(step < 6.0 * shell.mesh.meanEdgeLength());
  }
}

TEST_CASE("biventricular phantom passes the pipeline input checks") {
  TetMesh phantom = biventricularPhantom({}, 1);
  CHECK_NOTHROW(validatePipelineInput(phantom));
}

TEST_CASE("biventricular phantom base nodes sit on the truncation plane") {
  TetMesh phantom = biventricularPhantom({}, 1);
  for (int v : phantom.labelNodes({SurfaceLabel::Base})) {
    CHECK(std::abs(phantom.node(v).z()) < 1e-9);
  }
}

TEST_CASE("resolution steps double the node count within 30 percent") {
  int prev = biventricularPhantom({}, 1).nNodes();
  for (int res = 2; res <= 3; ++res) {
    int count = biventricularPhantom({}, res).nNodes();
    double ratio = static_cast<double>(count) / prev;
    CHECK(ratio > 2.0 * 0.7);
    CHECK(ratio < 2.0 * 1.3);
    prev = count;
  }
}

TEST_CASE("generators are deterministic") {
  BivPhantomParams params;
  params.seed = 11;
  TetMesh m1 = biventricularPhantom(params, 1);
  TetMesh m2 = biventricularPhantom(params, 1);
  CHECK(m1.nodes() == m2.nodes());
  CHECK(m1.tets() == m2.tets());

  ShellPhantom s1 = ellipsoidShell(ShellKind::Nonuniform, 1);
  ShellPhantom s2 = ellipsoidShell(ShellKind::Nonuniform, 1);
  CHECK(s1.mesh.nodes() == s2.mesh.nodes());
}

TEST_CASE("nonuniform wall variant stays valid") {
  BivPhantomParams params;
  params.nonuniformWall = true;
  TetMesh phantom = biventricularPhantom(params, 1);
  CHECK_NOTHROW(validatePipelineInput(phantom));
}

TEST_CASE("rigid transform and scale variants") {
  BivPhantomParams params;
  params.translation = Vec3(10, -5, 3);
  double angle = 0.4;
  params.rotation << std::cos(angle), -std::sin(angle), 0, std::sin(angle), std::cos(angle), 0, 0, 0, 1;
  params.scale = 1.2;
  TetMesh phantom = biventricularPhantom(params, 1);
  CHECK_NOTHROW(validatePipelineInput(phantom));
  TetMesh reference = biventricularPhantom({}, 1);
  CHECK(phantom.totalVolume() ==
        doctest::Approx(reference.totalVolume() * 1.2 * 1.2 * 1.2).epsilon(1e-9));
}

TEST_CASE("invalid parameters are rejected") {
  BivPhantomParams params;
  params.rvWedgeEndDeg = params.rvWedgeStartDeg;  // empty wedge
  CHECK_THROWS_AS(biventricularPhantom(params, 1), InputError);
  BivPhantomParams params2;
  params2.wallVariation = 20.0;
  params2.nonuniformWall = true;
  CHECK_THROWS_AS(biventricularPhantom(params2, 1), InputError);
}
