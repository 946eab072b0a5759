#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmst/data.hpp"

namespace pmst::gamm {

/// Natural cubic regression spline in the value-at-knot parametrisation: the
/// coefficient of basis function k is the curve's value at knot k. Spans all
/// linear functions; beyond the boundary knots the curve continues linearly.
struct SplineBasis {
  std::string covariate;
  Eigen::VectorXd knots;    // strictly increasing
  Eigen::MatrixXd penalty;  // integral of squared second derivative, K x K
  Eigen::MatrixXd second;   // K x K map from knot values to knot second derivatives

  /// Throws TooFewDistinctValues for fewer than 3 knots or non-increasing knots.
  static SplineBasis from_knots(std::string covariate, Eigen::VectorXd knots);

  [[nodiscard]] Eigen::Index size() const { return knots.size(); }
  [[nodiscard]] Eigen::RowVectorXd row(double x) const;
  [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
};

/// K knots at evenly spaced quantiles (0, 1/(K-1), ..., 1) of the distinct
/// values of x, so the extremes are always knots.
Eigen::VectorXd quantile_knots(const Eigen::VectorXd& x, int k);

struct CubicBasis {
  SplineBasis basis;
  Eigen::MatrixXd matrix;  // x.size() x K
};

/// Throws TooFewDistinctValues when x has fewer than K distinct values or K < 3.
CubicBasis cubic_basis(const Eigen::VectorXd& x, int k, std::string covariate = {});

/// entry (i, k) = exp(-dist(station_i, knot_k) / theta).
Eigen::MatrixXd spatial_basis(std::span<const Station> stations, std::span<const Station> knots, double theta);
/// Ridge penalty of the spatial smooth: the knot correlation matrix.
Eigen::MatrixXd spatial_penalty(std::span<const Station> knots, double theta);
/// Default range: the largest pairwise distance among the knots (1 when all coincide).
double max_distance_range(std::span<const Station> knots);

}  // namespace pmst::gamm
