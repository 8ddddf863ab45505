#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cobiveco/errors.hpp"
#include "cobiveco/operators.hpp"
#include "cobiveco/phantom.hpp"
#include "support.hpp"

#include <random>
#include <unordered_map>
#include <unordered_set>

using namespace cobiveco;
using namespace cobiveco::testing;

TEST_CASE("gradient operator is exact on affine fields") {
  TetMesh mesh = slabMesh(4, 3, 3);
  SparseMat grad = gradientOperator(mesh);

  VectorField gx = applyGradient(grad, fieldOf(mesh, [](const Vec3& p) { return p.x(); }));
  VectorField gc = applyGradient(grad, fieldOf(mesh, [](const Vec3&) { return 7.5; }));
  VectorField ga = applyGradient(grad, fieldOf(mesh, [](const Vec3& p) {
                                    return 2.0 * p.x() - 3.0 * p.y() + 0.5 * p.z() + 1.0;
                                  }));
  for (int e = 0; e < mesh.nTets(); ++e) {
    CHECK((Vec3(gx.row(e)) - Vec3(1, 0, 0)).norm() < 1e-10);
    CHECK(Vec3(gc.row(e)).norm() < 1e-10);
    CHECK((Vec3(ga.row(e)) - Vec3(2, -3, 0.5)).norm() < 1e-10);
  }
}

TEST_CASE("gradient of x^2 matches the element-wise mean slope") {
  TetMesh mesh = slabMesh(8, 2, 2, 2.0, 1.0, 1.0);
  SparseMat grad = gradientOperator(mesh);
  VectorField g = applyGradient(grad, fieldOf(mesh, [](const Vec3& p) { return p.x() * p.x(); }));
  for (int e = 0; e < mesh.nTets(); ++e) {
    double xmin = 1e300, xmax = -1e300;
    for (int k = 0; k < 4; ++k) {
      double x = mesh.node(mesh.tets()(e, k)).x();
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    // analytic mean of d(x^2)/dx over [xmin, xmax]
    double oracle = (xmax * xmax - xmin * xmin) / (xmax - xmin);
    CHECK(g(e, 0) == doctest::Approx(oracle).epsilon(0).scale(1).epsilon(1e-9));
    CHECK(std::abs(g(e, 1)) < 1e-9);
    CHECK(std::abs(g(e, 2)) < 1e-9);
  }
}

TEST_CASE("laplacian is symmetric with zero row sums") {
  TetMesh mesh = slabMesh(3, 3, 3);
  SparseMat lap = laplacianOperator(mesh);
  SparseMat diff = SparseMat(lap.transpose()) - lap;
  CHECK(diff.coeffs().cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd rowSums = lap * Eigen::VectorXd::Ones(mesh.nNodes());
  CHECK(rowSums.cwiseAbs().maxCoeff() < 1e-10);

  // interior residual for an affine field
  ScalarField affine = fieldOf(mesh, [](const Vec3& p) { return 1.5 * p.x() - p.y() + 2.0 * p.z(); });
  Eigen::VectorXd res = lap * affine;
  std::vector<char> onBoundary(static_cast<std::size_t>(mesh.nNodes()), 0);
  for (const auto& bf : mesh.boundaryFaces()) {
    for (int v : bf.nodes) onBoundary[static_cast<std::size_t>(v)] = 1;
  }
  for (int i = 0; i < mesh.nNodes(); ++i) {
    if (!onBoundary[static_cast<std::size_t>(i)]) CHECK(std::abs(res(i)) < 1e-9);
  }
}

TEST_CASE("laplacian flags degenerate tets") {
  Points nodes(5, 3);
  nodes << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0.5, 0.5, 1e-15;
  Tets tets(2, 4);
  tets << 0, 1, 2, 3, 0, 1, 2, 4;  // second tet nearly flat
  CHECK_THROWS_AS(TetMesh(std::move(nodes), std::move(tets)), NumericError);
}

TEST_CASE("barycentric interpolation") {
  TetMesh mesh = slabMesh(3, 3, 3);
  SUBCASE("row at a mesh node is a unit vector") {
    Points pts(1, 3);
    pts.row(0) = mesh.node(13);
    SparseMat interp = interpolationMatrix(mesh, pts);
    CHECK(interp.nonZeros() == 1);
    CHECK(interp.coeff(0, 13) == 1.0);
  }
  SUBCASE("tet centroid gets weights 0.25") {
    Points pts(1, 3);
    pts.row(0) = mesh.tetCentroid(5);
    SparseMat interp = interpolationMatrix(mesh, pts);
    for (int k = 0; k < 4; ++k) {
      CHECK(interp.coeff(0, mesh.tets()(5, k)) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("affine fields reproduce exactly at random interior points") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    Points pts(100, 3);
    for (int i = 0; i < 100; ++i) pts.row(i) << dist(rng), dist(rng), dist(rng);
    SparseMat interp = interpolationMatrix(mesh, pts);
    ScalarField f = fieldOf(mesh, [](const Vec3& p) { return 3.0 * p.x() - p.y() + 0.25 * p.z() - 2.0; });
    Eigen::VectorXd vals = interp * f;
    for (int i = 0; i < 100; ++i) {
      double exact = 3.0 * pts(i, 0) - pts(i, 1) + 0.25 * pts(i, 2) - 2.0;
      CHECK(std::abs(vals(i) - exact) < 1e-10);
    }
    // partition of unity
    Eigen::VectorXd ones = interp * Eigen::VectorXd::Ones(mesh.nNodes());
    CHECK((ones.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("outside point errors with its index") {
    Points pts(2, 3);
    pts.row(0) << 0.5, 0.5, 0.5;
    pts.row(1) << 5.0, 0.5, 0.5;
    CHECK_THROWS_WITH_AS(interpolationMatrix(mesh, pts),
                         doctest::Contains("point 1"), InputError);
    InterpolationOptions opts;
    opts.allowNearest = true;
    SparseMat interp = interpolationMatrix(mesh, pts, opts);
    CHECK(interp.rows() == 2);  // nearest fallback extrapolates instead
  }
}

TEST_CASE("interpolation at the mesh's own nodes is the identity") {
  TetMesh mesh = slabMesh(3, 2, 2);
  SparseMat interp = interpolationMatrix(mesh, mesh.nodes());
  ScalarField f = fieldOf(mesh, [](const Vec3& p) { return std::sin(3.0 * p.x()) + p.y() * p.z(); });
  Eigen::VectorXd vals = interp * f;
  CHECK((vals - f).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("connected components") {
  SUBCASE("two disjoint triangles") {
    SurfaceMesh surf;
    surf.nodes.resize(6, 3);
    surf.nodes << 0, 0, 0, 1, 0, 0, 0, 1, 0, 5, 5, 5, 6, 5, 5, 5, 6, 5;
    surf.triangles.resize(2, 3);
    surf.triangles << 0, 1, 2, 3, 4, 5;
    surf.parentNodes.assign(6, -1);
    int n = 0;
    auto labels = connectedComponents(surf, &n);
    CHECK(n == 2);
    CHECK(labels[0] == 0);
    CHECK(labels[3] == 1);
  }
  SUBCASE("phantom epicardium is one component") {
    TetMesh phantom = biventricularPhantom({}, 1);
    int n = 0;
    connectedComponents(phantom.extractSurface({SurfaceLabel::Epi}), &n);
    CHECK(n == 1);
  }
}

TEST_CASE("extract_surface") {
  TetMesh phantom = biventricularPhantom({}, 1);
  SUBCASE("base surface lies on the truncation plane") {
    SurfaceMesh base = phantom.extractSurface({SurfaceLabel::Base});
    CHECK(base.nTriangles() > 0);
    CHECK(base.nodes.col(2).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("all four labels give the closed full boundary") {
    SurfaceMesh all = phantom.extractSurface(
        {SurfaceLabel::Base, SurfaceLabel::Epi, SurfaceLabel::Lv, SurfaceLabel::Rv});
    CHECK(all.nTriangles() == static_cast<int>(phantom.boundaryFaces().size()));
    CHECK(countBoundaryLoops(all) == 0);  // closed
    // Both cavities are basal pockets and the RV junction seam is interior
    // to the myocardium (welded band), so the boundary is a topological
    // sphere; pinch edges would show up as face counts above 2.
    std::unordered_map<std::uint64_t, int> edges;
    for (int t = 0; t < all.nTriangles(); ++t) {
      for (int k = 0; k < 3; ++k) {
        int A = all.triangles(t, k), B = all.triangles(t, (k + 1) % 3);
        if (A > B) std::swap(A, B);
        edges[(static_cast<std::uint64_t>(A) << 32) | static_cast<std::uint32_t>(B)] += 1;
      }
    }
    for (const auto& [key, count] : edges) CHECK(count % 2 == 0);
    int chi = all.nNodes() - static_cast<int>(edges.size()) + all.nTriangles();
    CHECK(chi == 2);
  }
  SUBCASE("LV endocardium is a single component") {
    int n = 0;
    connectedComponents(phantom.extractSurface({SurfaceLabel::Lv}), &n);
    CHECK(n == 1);
  }
  SUBCASE("re-extraction is idempotent") {
    SurfaceMesh epi = phantom.extractSurface({SurfaceLabel::Epi});
    SurfaceMesh epi2 = phantom.extractSurface({SurfaceLabel::Epi});
    CHECK(epi.nodes == epi2.nodes);
    CHECK(epi.triangles == epi2.triangles);
  }
  SUBCASE("missing label errors") {
    TetMesh slab = slabMesh(2, 2, 2);
    CHECK_THROWS_AS(slab.extractSurface({SurfaceLabel::Lv}), InputError);
  }
}
