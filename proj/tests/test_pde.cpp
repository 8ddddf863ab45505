#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cobiveco/errors.hpp"
#include "cobiveco/pde.hpp"
#include "cobiveco/phantom.hpp"
#include "support.hpp"

#include <numbers>

using namespace cobiveco;
using namespace cobiveco::testing;

TEST_CASE("laplace slab oracle") {
  TetMesh mesh = slabMesh(8, 4, 4, 2.0, 1.0, 1.0);
  auto left = nodesWhere(mesh, [](const Vec3& p) { return p.x() < 1e-12; });
  auto right = nodesWhere(mesh, [](const Vec3& p) { return p.x() > 2.0 - 1e-12; });
  DirichletSpec bc({{left, 0.0}, {right, 1.0}}, mesh.nNodes());
  double residual = 0.0;
  ScalarField u = solveLaplace(mesh, bc, &residual);
  CHECK(residual < 1e-10);
  for (int i = 0; i < mesh.nNodes(); ++i) {
    CHECK(std::abs(u(i) - mesh.node(i).x() / 2.0) < 1e-9);
  }
  // Dirichlet nodes keep their prescribed values exactly
  for (int i : left) CHECK(u(i) == 0.0);
  for (int i : right) CHECK(u(i) == 1.0);
  // maximum principle
  CHECK(u.minCoeff() >= 0.0);
  CHECK(u.maxCoeff() <= 1.0);
}

TEST_CASE("laplace spherical shell oracle") {
  ShellParams params;
  params.semiA = params.semiB = params.semiC = 30.0;
  params.thickness = 8.0;
  ShellPhantom shell = ellipsoidShell(ShellKind::Uniform, 3, params);
  const TetMesh& mesh = shell.mesh;
  auto inner = mesh.labelNodes({SurfaceLabel::Base});
  auto outer = mesh.labelNodes({SurfaceLabel::Epi});
  DirichletSpec bc({{inner, 0.0}, {outer, 1.0}}, mesh.nNodes());
  ScalarField u = solveLaplace(mesh, bc);
  const double r1 = 30.0, r2 = 38.0;
  double maxErr = 0.0;
  for (int i = 0; i < mesh.nNodes(); ++i) {
    double r = mesh.node(i).norm();
    double exact = (1.0 / r1 - 1.0 / r) / (1.0 / r1 - 1.0 / r2);
    maxErr = std::max(maxErr, std::abs(u(i) - exact));
  }
  CHECK(maxErr < 0.01);
}

TEST_CASE("no Dirichlet nodes is an error") {
  TetMesh mesh = slabMesh(2, 2, 2);
  CHECK_THROWS_AS(DirichletSpec({{std::vector<int>{}, 0.0}}, mesh.nNodes()), InputError);
}

TEST_CASE("normalized gradient") {
  TetMesh mesh = slabMesh(4, 4, 4);
  SparseMat grad = gradientOperator(mesh);
  SUBCASE("f = x gives unit x vectors") {
    VectorField t = normalizedGradient(mesh, grad, fieldOf(mesh, [](const Vec3& p) { return p.x(); }));
    for (int e = 0; e < mesh.nTets(); ++e) {
      CHECK((Vec3(t.row(e)) - Vec3(1, 0, 0)).norm() < 1e-12);
    }
  }
  SUBCASE("constant field still yields unit vectors") {
    int fallbacks = 0;
    VectorField t = normalizedGradient(mesh, grad, ScalarField::Zero(mesh.nNodes()), &fallbacks);
    CHECK(fallbacks == mesh.nTets());
    for (int e = 0; e < mesh.nTets(); ++e) {
      CHECK(Vec3(t.row(e)).norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("radial harmonic on a spherical shell is radial within 2 degrees") {
    ShellParams params;
    params.semiA = params.semiB = params.semiC = 30.0;
    ShellPhantom shell = ellipsoidShell(ShellKind::Uniform, 2, params);
    const TetMesh& smesh = shell.mesh;
    ScalarField u = fieldOf(smesh, [](const Vec3& p) { return -1.0 / p.norm(); });
    SparseMat sgrad = gradientOperator(smesh);
    VectorField t = normalizedGradient(smesh, sgrad, u);
    int good = 0;
    for (int e = 0; e < smesh.nTets(); ++e) {
      Vec3 radial = smesh.tetCentroid(e).normalized();
      double angle = std::acos(std::clamp(radial.dot(Vec3(t.row(e))), -1.0, 1.0));
      if (angle < 2.0 * std::numbers::pi / 180.0) ++good;
    }
    CHECK(static_cast<double>(good) / smesh.nTets() >= 0.95);
  }
}

TEST_CASE("trajectory distance slab oracle") {
  TetMesh mesh = slabMesh(8, 4, 4, 2.0, 1.0, 1.0);
  SparseMat grad = gradientOperator(mesh);
  VectorField t(mesh.nTets(), 3);
  for (int e = 0; e < mesh.nTets(); ++e) t.row(e) << 1, 0, 0;
  auto seeds = nodesWhere(mesh, [](const Vec3& p) { return p.x() < 1e-12; });
  double residual = 0.0;
  ScalarField d = solveTrajectoryDistance(mesh, grad, t, seeds, +1, &residual);
  CHECK(residual < 1e-8);
  for (int i = 0; i < mesh.nNodes(); ++i) {
    CHECK(std::abs(d(i) - mesh.node(i).x()) < 1e-6);
  }
  for (int s : seeds) CHECK(d(s) == 0.0);
}

TEST_CASE("trajectory distance on an extruded annulus") {
  TetMesh mesh = annulusMesh(8, 96, 4, 20.0, 30.0, 10.0);
  SparseMat grad = gradientOperator(mesh);
  VectorField t(mesh.nTets(), 3);
  for (int e = 0; e < mesh.nTets(); ++e) {
    Vec3 c = mesh.tetCentroid(e);
    c.z() = 0.0;
    t.row(e) = c.normalized();
  }
  auto seeds = nodesWhere(mesh, [](const Vec3& p) {
    return std::hypot(p.x(), p.y()) < 20.0 + 1e-9;
  });
  ScalarField d = solveTrajectoryDistance(mesh, grad, t, seeds, +1);
  double maxRel = 0.0;
  for (int i = 0; i < mesh.nNodes(); ++i) {
    double r = std::hypot(mesh.node(i).x(), mesh.node(i).y());
    if (r - 20.0 > 1.0) {
      maxRel = std::max(maxRel, std::abs(d(i) - (r - 20.0)) / (r - 20.0));
    }
  }
  CHECK(maxRel < 0.01);
}

TEST_CASE("relative distance") {
  TetMesh mesh = slabMesh(8, 2, 2, 2.0, 1.0, 1.0);
  SparseMat grad = gradientOperator(mesh);
  VectorField t(mesh.nTets(), 3);
  for (int e = 0; e < mesh.nTets(); ++e) t.row(e) << 1, 0, 0;
  auto left = nodesWhere(mesh, [](const Vec3& p) { return p.x() < 1e-12; });
  auto right = nodesWhere(mesh, [](const Vec3& p) { return p.x() > 2.0 - 1e-12; });
  ScalarField dFrom = solveTrajectoryDistance(mesh, grad, t, left, +1);
  ScalarField dTo = solveTrajectoryDistance(mesh, grad, t, right, -1);
  ScalarField rel = relativeDistance(mesh, dFrom, dTo);
  for (int i : left) CHECK(rel(i) == 0.0);
  for (int i : right) CHECK(rel(i) == 1.0);
  for (int i = 0; i < mesh.nNodes(); ++i) {
    if (std::abs(mesh.node(i).x() - 1.0) < 1e-12) {
      CHECK(rel(i) == doctest::Approx(0.5).epsilon(1e-6));
    }
    CHECK(rel(i) >= 0.0);
    CHECK(rel(i) <= 1.0);
  }
}

TEST_CASE("poisson pair slab oracle") {
  TetMesh mesh = slabMesh(8, 4, 4, 2.0, 1.0, 1.0);
  SparseMat grad = gradientOperator(mesh);
  SparseMat lap = laplacianOperator(mesh);
  VectorField t(mesh.nTets(), 3);
  for (int e = 0; e < mesh.nTets(); ++e) t.row(e) << 1, 0, 0;
  auto left = nodesWhere(mesh, [](const Vec3& p) { return p.x() < 1e-12; });
  auto right = nodesWhere(mesh, [](const Vec3& p) { return p.x() > 2.0 - 1e-12; });
  auto [p1, p2] = solvePoissonPair(mesh, grad, lap, t, left, right);
  for (int i = 0; i < mesh.nNodes(); ++i) {
    CHECK(std::abs(p1(i) - mesh.node(i).x()) < 1e-6);
    CHECK(std::abs(p2(i) - (2.0 - mesh.node(i).x())) < 1e-6);
  }
  for (int s : left) CHECK(p1(s) == 0.0);
  for (int s : right) CHECK(p2(s) == 0.0);
}

TEST_CASE("eikonal distance") {
  TetMesh mesh = slabMesh(10, 4, 4, 2.0, 1.0, 1.0);
  auto seeds = nodesWhere(mesh, [](const Vec3& p) { return p.x() < 1e-12; });
  ScalarField d = eikonalDistance(mesh, seeds);
  for (int s : seeds) CHECK(d(s) == 0.0);
  for (int i = 0; i < mesh.nNodes(); ++i) {
    double x = mesh.node(i).x();
    if (x > 0.2) CHECK(std::abs(d(i) - x) / x < 0.08);
  }
  CHECK_THROWS_AS(eikonalDistance(mesh, {}), InputError);
}

TEST_CASE("trajectory distance is monotone along streamlines") {
  TetMesh mesh = slabMesh(8, 4, 4, 2.0, 1.0, 1.0);
  SparseMat grad = gradientOperator(mesh);
  VectorField t(mesh.nTets(), 3);
  for (int e = 0; e < mesh.nTets(); ++e) t.row(e) << 1, 0, 0;
  auto seeds = nodesWhere(mesh, [](const Vec3& p) { return p.x() < 1e-12; });
  ScalarField d = solveTrajectoryDistance(mesh, grad, t, seeds, +1);

  PointLocator locator(mesh);
  SparseMat interpAt;  // reuse interpolationMatrix per streamline point
  Points line = traceStreamline(locator, t, Vec3(0.05, 0.4, 0.6), 0.25 * mesh.meanEdgeLength(), 200);
  REQUIRE(line.rows() > 10);
  SparseMat sample = interpolationMatrix(locator, line, {});
  Eigen::VectorXd along = sample * d;
  for (Eigen::Index i = 0; i + 1 < along.size(); ++i) {
    CHECK(along(i + 1) > along(i) - 1e-3);
  }
}
