#include "pmst/spline.hpp"

#include <algorithm>
#include <cmath>

#include "pmst/error.hpp"
#include "pmst/kernels.hpp"

namespace pmst::gamm {

using Index = Eigen::Index;

SplineBasis SplineBasis::from_knots(std::string covariate, Eigen::VectorXd knots) {
  const Index k = knots.size();
  if (k < 3) throw Error(ErrorCode::TooFewDistinctValues, "a cubic regression spline needs at least 3 knots");
  for (Index j = 1; j < k; ++j)
    if (!(knots(j) > knots(j - 1))) throw Error(ErrorCode::TooFewDistinctValues, "knots must be strictly increasing");
  const Eigen::VectorXd h = knots.tail(k - 1) - knots.head(k - 1);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k - 2, k);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k - 2, k - 2);
  for (Index i = 0; i < k - 2; ++i) {
    d(i, i) = 1.0 / h(i);
    d(i, i + 1) = -1.0 / h(i) - 1.0 / h(i + 1);
    d(i, i + 2) = 1.0 / h(i + 1);
    b(i, i) = (h(i) + h(i + 1)) / 3.0;
    if (i + 1 < k - 2) b(i, i + 1) = b(i + 1, i) = h(i + 1) / 6.0;
  }
  const Eigen::MatrixXd binv_d = b.ldlt().solve(d);
  SplineBasis s;
  s.covariate = std::move(covariate);
  s.knots = std::move(knots);
  s.second = Eigen::MatrixXd::Zero(k, k);
  s.second.middleRows(1, k - 2) = binv_d;  // natural ends: zero curvature at the boundary knots
  s.penalty = d.transpose() * binv_d;
  s.penalty = 0.5 * (s.penalty + s.penalty.transpose()).eval();
  return s;
}

Eigen::RowVectorXd SplineBasis::row(double x) const {
  const Index k = knots.size();
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(k);
  if (x <= knots(0)) {
    // f(x0) + f'(x0) (x - x0), with f'(x0) = (b1 - b0)/h - h * delta1 / 6
    const double h = knots(1) - knots(0);
    const double dx = x - knots(0);
    r(0) = 1.0 - dx / h;
    r(1) = dx / h;
    r += (-h / 6.0 * dx) * second.row(1);
    return r;
  }
  if (x >= knots(k - 1)) {
    const double h = knots(k - 1) - knots(k - 2);
    const double dx = x - knots(k - 1);
    r(k - 1) = 1.0 + dx / h;
    r(k - 2) = -dx / h;
    r += (h / 6.0 * dx) * second.row(k - 2);
    return r;
  }
  const auto it = std::upper_bound(knots.data(), knots.data() + k, x);
  const Index j = std::clamp<Index>(static_cast<Index>(it - knots.data()) - 1, 0, k - 2);
  const double h = knots(j + 1) - knots(j);
  const double am = (knots(j + 1) - x) / h;
  const double ap = (x - knots(j)) / h;
  const double right = knots(j + 1) - x;
  const double left = x - knots(j);
  const double cm = (right * right * right / h - h * right) / 6.0;
  const double cp = (left * left * left / h - h * left) / 6.0;
  r(j) = am;
  r(j + 1) = ap;
  r += cm * second.row(j) + cp * second.row(j + 1);
  return r;
}

Eigen::MatrixXd SplineBasis::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out(x.size(), knots.size());
  for (Index i = 0; i < x.size(); ++i) out.row(i) = row(x(i));
  return out;
}

Eigen::VectorXd quantile_knots(const Eigen::VectorXd& x, int k) {
  if (k < 3) throw Error(ErrorCode::TooFewDistinctValues, "K must be >= 3");
  std::vector<double> u;
  u.reserve(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i)
    if (std::isfinite(x(i))) u.push_back(x(i));
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (static_cast<int>(u.size()) < k)
    throw Error(ErrorCode::TooFewDistinctValues,
                std::to_string(u.size()) + " distinct values for " + std::to_string(k) + " knots");
  Eigen::VectorXd knots(k);
  const double last = static_cast<double>(u.size() - 1);
  for (int j = 0; j < k; ++j) {
    const double pos = last * j / (k - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, u.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    knots(j) = u[lo] + frac * (u[hi] - u[lo]);
  }
  return knots;
}

CubicBasis cubic_basis(const Eigen::VectorXd& x, int k, std::string covariate) {
  CubicBasis out{SplineBasis::from_knots(std::move(covariate), quantile_knots(x, k)), {}};
  out.matrix = out.basis.evaluate(x);
  return out;
}

Eigen::MatrixXd spatial_basis(std::span<const Station> stations, std::span<const Station> knots, double theta) {
  if (knots.empty()) throw Error(ErrorCode::InvalidArgument, "spatial basis needs at least one knot");
  return corr_from_distance(cross_distance(stations, knots), theta);
}

Eigen::MatrixXd spatial_penalty(std::span<const Station> knots, double theta) {
  return corr_from_distance(distance_matrix(knots), theta);
}

double max_distance_range(std::span<const Station> knots) {
  const double d = knots.size() > 1 ? distance_matrix(knots).maxCoeff() : 0.0;
  return d > 0.0 ? d : 1.0;
}

}  // namespace pmst::gamm
