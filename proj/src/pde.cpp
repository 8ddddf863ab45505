#include "cobiveco/pde.hpp"

#include "cobiveco/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace cobiveco {

namespace {

// Reduced SPD solve of A x = b with fixed values on constrained nodes.
// A must be symmetric positive (semi-)definite on the free block.
ScalarField solveConstrained(const SparseMat& a, const ScalarField& rhs, const DirichletSpec& bc,
                             double* relResidual, const char* what) {
  const int n = static_cast<int>(a.rows());
  std::vector<int> freeIndex(static_cast<std::size_t>(n), -1);
  std::vector<int> freeNodes;
  ScalarField x(n);
  const auto& mask = bc.nodeMask();
  for (int i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)] >= 0) {
      x(i) = bc.sets()[static_cast<std::size_t>(mask[static_cast<std::size_t>(i)])].second;
    } else {
      freeIndex[static_cast<std::size_t>(i)] = static_cast<int>(freeNodes.size());
      freeNodes.push_back(i);
    }
  }
  const int nf = static_cast<int>(freeNodes.size());
  if (nf == 0) {
    if (relResidual) *relResidual = 0.0;
    return x;
  }

  Eigen::VectorXd bf(nf);
  for (int r = 0; r < nf; ++r) bf(r) = rhs(freeNodes[static_cast<std::size_t>(r)]);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros()));
  for (int col = 0; col < n; ++col) {
    const int fc = freeIndex[static_cast<std::size_t>(col)];
    for (SparseMat::InnerIterator it(a, col); it; ++it) {
      const int fr = freeIndex[static_cast<std::size_t>(it.row())];
      if (fr < 0) continue;
      if (fc >= 0) {
        trips.emplace_back(fr, fc, it.value());
      } else {
        bf(fr) -= it.value() * x(col);
      }
    }
  }
  SparseMat aff(nf, nf);
  aff.setFromTriplets(trips.begin(), trips.end());

  Eigen::SimplicialLDLT<SparseMat> solver;
  solver.compute(aff);
  if (solver.info() != Eigen::Success) {
    throw NumericError(std::string(what) + ": factorization failed (singular system?)");
  }
  Eigen::VectorXd xf = solver.solve(bf);
  if (solver.info() != Eigen::Success) {
    throw NumericError(std::string(what) + ": solve failed");
  }
  if (relResidual) {
    double denom = bf.norm();
    *relResidual = denom > 0 ? (aff * xf - bf).norm() / denom : (aff * xf).norm();
  }
  for (int r = 0; r < nf; ++r) x(freeNodes[static_cast<std::size_t>(r)]) = xf(r);
  return x;
}

// Directional-derivative matrix: row e of the result is t_e . grad restricted
// to element e, i.e. D d approximates (grad d) . t per element.
SparseMat directionalDerivative(const SparseMat& gradient, const VectorField& tangent) {
  const Eigen::Index m = tangent.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * 3);
  for (Eigen::Index e = 0; e < m; ++e) {
    for (int c = 0; c < 3; ++c) trips.emplace_back(static_cast<int>(e), static_cast<int>(3 * e + c), tangent(e, c));
  }
  SparseMat sel(m, 3 * m);
  sel.setFromTriplets(trips.begin(), trips.end());
  return sel * gradient;
}

}  // namespace

DirichletSpec::DirichletSpec(std::vector<std::pair<std::vector<int>, double>> sets, int nNodes)
    : sets_(std::move(sets)) {
  mask_.assign(static_cast<std::size_t>(nNodes), -1);
  bool any = false;
  minValue_ = std::numeric_limits<double>::infinity();
  maxValue_ = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < sets_.size(); ++s) {
    for (int v : sets_[s].first) {
      if (v < 0 || v >= nNodes) throw InputError("DirichletSpec: node index out of range");
      if (mask_[static_cast<std::size_t>(v)] >= 0) {
        throw InputError("DirichletSpec: node " + std::to_string(v) +
                         " appears in two Dirichlet sets (unresolved rim conflict)");
      }
      mask_[static_cast<std::size_t>(v)] = static_cast<int>(s);
      any = true;
    }
    if (!sets_[s].first.empty()) {
      minValue_ = std::min(minValue_, sets_[s].second);
      maxValue_ = std::max(maxValue_, sets_[s].second);
    }
  }
  if (!any) throw InputError("DirichletSpec: all node sets are empty");
}

std::vector<int> subtractNodes(std::vector<int> nodes, const std::vector<int>& removed) {
  std::vector<int> sortedRemoved = removed;
  std::sort(sortedRemoved.begin(), sortedRemoved.end());
  nodes.erase(std::remove_if(nodes.begin(), nodes.end(),
                             [&](int v) {
                               return std::binary_search(sortedRemoved.begin(), sortedRemoved.end(), v);
                             }),
              nodes.end());
  return nodes;
}

ScalarField solveLaplace(const TetMesh& mesh, const SparseMat& laplacian, const DirichletSpec& bc,
                         double* relResidual) {
  // L is negative semi-definite; solve with the stiffness matrix K = -L.
  SparseMat stiffness = -laplacian;
  ScalarField zero = ScalarField::Zero(mesh.nNodes());
  ScalarField u = solveConstrained(stiffness, zero, bc, relResidual, "solveLaplace");
  // discrete maximum principle: clamp residual overshoot to the Dirichlet range
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u(i) = std::clamp(u(i), bc.minValue(), bc.maxValue());
  }
  return u;
}

ScalarField solveLaplace(const TetMesh& mesh, const DirichletSpec& bc, double* relResidual) {
  return solveLaplace(mesh, laplacianOperator(mesh), bc, relResidual);
}

VectorField normalizeVectorField(const TetMesh& mesh, const VectorField& raw, double scale,
                                 int* fallbackCount) {
  const Eigen::Index m = raw.rows();
  VectorField unit(m, 3);
  std::vector<char> valid(static_cast<std::size_t>(m), 0);
  for (Eigen::Index e = 0; e < m; ++e) {
    double norm = raw.row(e).norm();
    if (norm > scale) {
      unit.row(e) = raw.row(e) / norm;
      valid[static_cast<std::size_t>(e)] = 1;
    } else {
      unit.row(e).setZero();
    }
  }
  int fallbacks = 0;
  const auto& neighbors = mesh.faceNeighbors();
  for (Eigen::Index e = 0; e < m; ++e) {
    if (valid[static_cast<std::size_t>(e)]) continue;
    ++fallbacks;
    Vec3 acc = Vec3::Zero();
    for (int nb : neighbors[static_cast<std::size_t>(e)]) {
      if (nb >= 0 && valid[static_cast<std::size_t>(nb)]) acc += Vec3(unit.row(nb));
    }
    double norm = acc.norm();
    unit.row(e) = norm > 1e-300 ? Vec3(acc / norm) : Vec3(1, 0, 0);
  }
  if (fallbackCount) *fallbackCount = fallbacks;
  return unit;
}

VectorField normalizedGradient(const TetMesh& mesh, const SparseMat& gradient,
                               const ScalarField& field, int* fallbackCount) {
  if (!field.allFinite()) throw InputError("normalizedGradient: field has non-finite values");
  VectorField grad = applyGradient(gradient, field);
  double range = field.maxCoeff() - field.minCoeff();
  double scale = 1e-12 * range / mesh.meanEdgeLength();
  return normalizeVectorField(mesh, grad, scale, fallbackCount);
}

ScalarField solveTrajectoryDistance(const TetMesh& mesh, const SparseMat& gradient,
                                    const VectorField& tangent, const std::vector<int>& seeds,
                                    int sign, double* relResidual) {
  if (seeds.empty()) throw InputError("solveTrajectoryDistance: seed set is empty");
  if (tangent.rows() != mesh.nTets()) throw InputError("solveTrajectoryDistance: tangent size mismatch");
  SparseMat dir = directionalDerivative(gradient, tangent);
  if (sign < 0) dir = -dir;
  // volume-weighted normal equations of D d = 1
  Eigen::VectorXd w = mesh.tetVolumes();
  SparseMat dw = w.asDiagonal() * dir;
  SparseMat normal = SparseMat(dir.transpose()) * dw;
  ScalarField rhs = dir.transpose() * (w.asDiagonal() * Eigen::VectorXd::Ones(mesh.nTets()));
  DirichletSpec bc({{seeds, 0.0}}, mesh.nNodes());
  return solveConstrained(normal, rhs, bc, relResidual, "solveTrajectoryDistance");
}

ScalarField relativeDistance(const TetMesh& mesh, const ScalarField& dFrom, const ScalarField& dTo) {
  const int n = mesh.nNodes();
  if (dFrom.size() != n || dTo.size() != n) throw InputError("relativeDistance: field size mismatch");
  const double floor = 1e-12 * mesh.meanEdgeLength();
  ScalarField out(n);
  std::vector<char> valid(static_cast<std::size_t>(n), 0);
  int nInvalid = 0;
  for (int i = 0; i < n; ++i) {
    double denom = dFrom(i) + dTo(i);
    if (std::abs(denom) >= floor) {
      out(i) = std::clamp(dFrom(i) / denom, 0.0, 1.0);
      valid[static_cast<std::size_t>(i)] = 1;
    } else {
      out(i) = 0.0;
      ++nInvalid;
    }
  }
  if (nInvalid == 0) return out;
  if (nInvalid == n) throw NumericError("relativeDistance: all denominators vanish");

  // layered fill from valid neighbors (graph-nearest value)
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n));
  for (int e = 0; e < mesh.nTets(); ++e) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        int a = mesh.tets()(e, i), b = mesh.tets()(e, j);
        adjacency[static_cast<std::size_t>(a)].push_back(b);
        adjacency[static_cast<std::size_t>(b)].push_back(a);
      }
    }
  }
  while (nInvalid > 0) {
    std::vector<int> fillable;
    std::vector<double> fillValue;
    for (int i = 0; i < n; ++i) {
      if (valid[static_cast<std::size_t>(i)]) continue;
      int bestNb = -1;
      for (int nb : adjacency[static_cast<std::size_t>(i)]) {
        if (valid[static_cast<std::size_t>(nb)] && (bestNb < 0 || nb < bestNb)) bestNb = nb;
      }
      if (bestNb >= 0) {
        fillable.push_back(i);
        fillValue.push_back(out(bestNb));
      }
    }
    if (fillable.empty()) throw NumericError("relativeDistance: disconnected invalid region");
    for (std::size_t k = 0; k < fillable.size(); ++k) {
      out(fillable[k]) = fillValue[k];
      valid[static_cast<std::size_t>(fillable[k])] = 1;
    }
    nInvalid -= static_cast<int>(fillable.size());
  }
  return out;
}

std::pair<ScalarField, ScalarField> solvePoissonPair(const TetMesh& mesh, const SparseMat& gradient,
                                                     const SparseMat& laplacian,
                                                     const VectorField& tangent,
                                                     const std::vector<int>& seedsFrom,
                                                     const std::vector<int>& seedsTo) {
  if (seedsFrom.empty() || seedsTo.empty()) throw InputError("solvePoissonPair: seed set is empty");
  // weak-form divergence: (G^T W t)_i = sum_e vol_e grad(phi_i) . t_e
  Eigen::VectorXd flat(3 * mesh.nTets());
  for (int e = 0; e < mesh.nTets(); ++e) {
    flat.segment<3>(3 * e) = tangent.row(e).transpose() * mesh.tetVolumes()(e);
  }
  ScalarField weakDiv = gradient.transpose() * flat;
  SparseMat stiffness = -laplacian;
  DirichletSpec bc1({{seedsFrom, 0.0}}, mesh.nNodes());
  DirichletSpec bc2({{seedsTo, 0.0}}, mesh.nNodes());
  // lap p = div t  =>  K p = G^T W t  (K = -L)
  ScalarField p1 = solveConstrained(stiffness, weakDiv, bc1, nullptr, "solvePoissonPair");
  ScalarField negWeakDiv = -weakDiv;
  ScalarField p2 = solveConstrained(stiffness, negWeakDiv, bc2, nullptr, "solvePoissonPair");
  return {p1, p2};
}

ScalarField eikonalDistance(const TetMesh& mesh, const std::vector<int>& seeds) {
  if (seeds.empty()) throw InputError("eikonalDistance: seed set is empty");
  const int n = mesh.nNodes();
  std::vector<std::vector<std::pair<int, double>>> adjacency(static_cast<std::size_t>(n));
  for (int e = 0; e < mesh.nTets(); ++e) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) {
        int a = mesh.tets()(e, i), b = mesh.tets()(e, j);
        double len = (mesh.node(a) - mesh.node(b)).norm();
        adjacency[static_cast<std::size_t>(a)].push_back({b, len});
        adjacency[static_cast<std::size_t>(b)].push_back({a, len});
      }
    }
  }
  ScalarField dist = ScalarField::Constant(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  for (int s : seeds) {
    dist(s) = 0.0;
    queue.push({0.0, s});
  }
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist(v)) continue;
    for (const auto& [nb, len] : adjacency[static_cast<std::size_t>(v)]) {
      double nd = d + len;
      if (nd < dist(nb)) {
        dist(nb) = nd;
        queue.push({nd, nb});
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(dist(i))) {
      throw NumericError("eikonalDistance: node " + std::to_string(i) + " unreachable from seeds");
    }
  }
  return dist;
}

Points traceStreamline(const PointLocator& locator, const VectorField& directions,
                       const Vec3& start, double step, int maxSteps) {
  std::vector<Vec3> pts{start};
  const double tol = 1e-9 * locator.mesh().meanEdgeLength();
  Eigen::Vector4d bary;
  Vec3 x = start;
  for (int s = 0; s < maxSteps; ++s) {
    int tet = locator.locate(x, bary, tol);
    if (tet < 0) break;
    Vec3 k1 = directions.row(tet);
    int tetMid = locator.locate(x + 0.5 * step * k1, bary, tol);
    if (tetMid < 0) break;
    Vec3 k2 = directions.row(tetMid);
    Vec3 next = x + step * k2;
    if (locator.locate(next, bary, tol) < 0) break;  // stop at the boundary
    x = next;
    pts.push_back(x);
  }
  Points out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i];
  return out;
}

}  // namespace cobiveco
