#pragma once

#include <span>

#include <Eigen/Dense>

#include "pmst/data.hpp"

namespace pmst {

/// Range of an exponential correlation: degrees of arc for space, days for time.
struct ExpCorrParams {
  double range = 1.0;
};

/// Separable exponential space-time covariance with nugget.
struct SeparableCorrParams {
  double theta_s = 1.0;  // degrees
  double theta_t = 1.0;  // days
  double sill = 1.0;     // (ug/m3)^2
  double nugget = 0.0;   // (ug/m3)^2

  friend bool operator==(const SeparableCorrParams&, const SeparableCorrParams&) = default;
};

inline constexpr double kDefaultJitter = 1e-8;

/// exp(-d / range). Throws NonFiniteInput for non-finite or negative d, or range <= 0.
double exp_corr(double d, ExpCorrParams p);
/// exp(-h / theta_s) * exp(-u / theta_t).
double separable_corr(double h, double u, const SeparableCorrParams& p);
/// sill * separable_corr(h, u), plus the nugget when `same_point`.
double separable_cov(double h, double u, const SeparableCorrParams& p, bool same_point = false);

/// Exponential correlation on great-circle distances with `jitter` added to
/// the diagonal. Throws DuplicateLocationWithoutJitter when two stations
/// coincide and jitter is 0.
Eigen::MatrixXd corr_matrix(std::span<const Station> locations, ExpCorrParams theta, double jitter = kDefaultJitter);
/// Element-wise exp(-d / range) of a precomputed distance matrix.
Eigen::MatrixXd corr_from_distance(const Eigen::MatrixXd& distance, double range);

/// Solves A X = B for symmetric positive-definite A. Throws NotPositiveDefinite.
Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// log|A| from a successful Cholesky factor.
double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Cholesky factor, throwing NotPositiveDefinite with `what` on failure.
Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& a, const char* what);

}  // namespace pmst
