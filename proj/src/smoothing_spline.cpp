#include "cobiveco/smoothing_spline.hpp"

#include "cobiveco/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace cobiveco {

namespace {

// Reinsch-style fit: minimize sum_i w_i |s(t_i) - y_i|^2 + lambda * int |s''|^2.
// With Q the second-difference operator and T the curvature Gram matrix, the
// interior second derivatives c solve (lambda Q^T W^-1 Q + T) c = Q^T y and
// the fitted values are a = y - lambda W^-1 Q c.
void fitOnce(const Eigen::VectorXd& t, const Points& y, const Eigen::VectorXd& weights,
             double lambda, Points& fitted, Points& secondDerivs) {
  const Eigen::Index n = t.size();
  Eigen::VectorXd h(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) h(i) = t(i + 1) - t(i);

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n - 2);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n - 2, n - 2);
  for (Eigen::Index j = 0; j < n - 2; ++j) {
    q(j, j) = 1.0 / h(j);
    q(j + 1, j) = -1.0 / h(j) - 1.0 / h(j + 1);
    q(j + 2, j) = 1.0 / h(j + 1);
    gram(j, j) = (h(j) + h(j + 1)) / 3.0;
    if (j + 1 < n - 2) {
      gram(j, j + 1) = h(j + 1) / 6.0;
      gram(j + 1, j) = h(j + 1) / 6.0;
    }
  }
  Eigen::VectorXd invW = weights.cwiseInverse();
  Eigen::MatrixXd system = lambda * q.transpose() * invW.asDiagonal() * q + gram;
  Eigen::LDLT<Eigen::MatrixXd> solver(system);
  Points rhs = q.transpose() * y;
  Eigen::MatrixXd c = solver.solve(rhs);
  fitted = y - lambda * invW.asDiagonal() * (q * c);
  secondDerivs = Points::Zero(n, 3);
  secondDerivs.middleRows(1, n - 2) = c;
}

double rmsdOf(const Points& fitted, const Points& y) {
  return std::sqrt((fitted - y).rowwise().squaredNorm().mean());
}

}  // namespace

Vec3 SmoothingSpline::evaluate(double t) const {
  const Eigen::Index n = knots.size();
  t = std::clamp(t, knots(0), knots(n - 1));
  Eigen::Index lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    Eigen::Index mid = (lo + hi) / 2;
    if (knots(mid) <= t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double h = knots(hi) - knots(lo);
  double a = (knots(hi) - t) / h;
  double b = (t - knots(lo)) / h;
  Vec3 va = values.row(lo), vb = values.row(hi);
  Vec3 ca = secondDerivs.row(lo), cb = secondDerivs.row(hi);
  return a * va + b * vb +
         ((a * a * a - a) * ca + (b * b * b - b) * cb) * (h * h) / 6.0;
}

ResampledCurve smoothResampleCurve(const Points& points, const Eigen::VectorXd& weights,
                                   double rmsdTarget, int nSamples) {
  const Eigen::Index n = points.rows();
  if (n < 4) throw InputError("smoothResampleCurve: need at least 4 points");
  if (weights.size() != n) throw InputError("smoothResampleCurve: weight size mismatch");
  if (nSamples < 2) throw InputError("smoothResampleCurve: nSamples must be >= 2");

  // normalized chord-length parameterization; repeated points are collapsed
  std::vector<Eigen::Index> kept{0};
  for (Eigen::Index i = 1; i < n; ++i) {
    if ((points.row(i) - points.row(kept.back())).norm() > 1e-12) kept.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(kept.size());
  if (m < 4) throw InputError("smoothResampleCurve: fewer than 4 distinct points");
  Points y(m, 3);
  Eigen::VectorXd w(m), t(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    y.row(i) = points.row(kept[static_cast<std::size_t>(i)]);
    w(i) = weights(kept[static_cast<std::size_t>(i)]);
  }
  t(0) = 0.0;
  for (Eigen::Index i = 1; i < m; ++i) t(i) = t(i - 1) + (y.row(i) - y.row(i - 1)).norm();
  double chordLength = t(m - 1);
  t /= chordLength;

  ResampledCurve result;
  result.spline.knots = t;

  // bisection on log(lambda) towards RMSD == rmsdTarget
  double logLo = std::log(1e-14), logHi = std::log(1e6);
  Points fitted, c;
  fitOnce(t, y, w, std::exp(logHi), fitted, c);
  double rmsdHi = rmsdOf(fitted, y);
  if (rmsdHi <= rmsdTarget) {
    // curve is almost straight: maximal smoothing already under the target
    result.lambda = std::exp(logHi);
    result.rmsd = rmsdHi;
  } else {
    double lambda = 0.0, rmsd = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double logMid = 0.5 * (logLo + logHi);
      lambda = std::exp(logMid);
      fitOnce(t, y, w, lambda, fitted, c);
      rmsd = rmsdOf(fitted, y);
      if (std::abs(rmsd - rmsdTarget) <= 0.01 * rmsdTarget) break;
      if (rmsd > rmsdTarget) {
        logHi = logMid;
      } else {
        logLo = logMid;
      }
    }
    result.lambda = lambda;
    result.rmsd = rmsd;
  }
  result.spline.values = fitted;
  result.spline.secondDerivs = c;

  // dense polyline for the arc-length table; resolution keeps the relative
  // arc-spacing error of the resampled nodes below 1e-6
  const Eigen::Index dense = std::max<Eigen::Index>(16000, 100 * m);
  Eigen::VectorXd denseParams(dense), arc(dense);
  Points densePts(dense, 3);
  for (Eigen::Index i = 0; i < dense; ++i) {
    denseParams(i) = static_cast<double>(i) / static_cast<double>(dense - 1);
    densePts.row(i) = result.spline.evaluate(denseParams(i));
  }
  arc(0) = 0.0;
  for (Eigen::Index i = 1; i < dense; ++i) {
    arc(i) = arc(i - 1) + (densePts.row(i) - densePts.row(i - 1)).norm();
  }
  double total = arc(dense - 1);
  if (total <= 0) throw NumericError("smoothResampleCurve: fitted curve has zero length");

  result.samples.resize(nSamples, 3);
  result.params.resize(nSamples);
  Eigen::Index cursor = 0;
  for (int k = 0; k < nSamples; ++k) {
    double target = total * static_cast<double>(k) / static_cast<double>(nSamples - 1);
    while (cursor + 1 < dense - 1 && arc(cursor + 1) < target) ++cursor;
    double seg = arc(cursor + 1) - arc(cursor);
    double frac = seg > 0 ? (target - arc(cursor)) / seg : 0.0;
    double p = denseParams(cursor) + frac * (denseParams(cursor + 1) - denseParams(cursor));
    result.params(k) = p;
    result.samples.row(k) = (1.0 - frac) * densePts.row(cursor) + frac * densePts.row(cursor + 1);
  }
  return result;
}

}  // namespace cobiveco
