#include "pmst/kernels.hpp"

#include <cmath>
#include <string>

#include "pmst/error.hpp"

namespace pmst {

namespace {

void require_finite_distance(double d, const char* what) {
  if (!std::isfinite(d) || d < 0.0) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " must be finite and >= 0");
}

void require_range(double r, const char* what) {
  if (!std::isfinite(r) || !(r > 0.0)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " must be finite and > 0");
}

}  // namespace

double exp_corr(double d, ExpCorrParams p) {
  require_finite_distance(d, "distance");
  require_range(p.range, "range");
  return std::exp(-d / p.range);
}

double separable_corr(double h, double u, const SeparableCorrParams& p) {
  return exp_corr(h, {p.theta_s}) * exp_corr(u, {p.theta_t});
}

double separable_cov(double h, double u, const SeparableCorrParams& p, bool same_point) {
  return p.sill * separable_corr(h, u, p) + (same_point ? p.nugget : 0.0);
}

Eigen::MatrixXd corr_from_distance(const Eigen::MatrixXd& distance, double range) {
  require_range(range, "range");
  return (-distance.array() / range).exp().matrix();
}

Eigen::MatrixXd corr_matrix(std::span<const Station> locations, ExpCorrParams theta, double jitter) {
  if (locations.empty()) throw Error(ErrorCode::InvalidArgument, "corr_matrix needs at least one location");
  require_range(theta.range, "range");
  if (!(jitter >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter must be >= 0");
  const Eigen::MatrixXd d = distance_matrix(locations);
  if (jitter == 0.0) {
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = i + 1; j < d.cols(); ++j)
        if (d(i, j) == 0.0)
          throw Error(ErrorCode::DuplicateLocationWithoutJitter,
                      locations[static_cast<std::size_t>(i)].id + " and " + locations[static_cast<std::size_t>(j)].id);
  }
  Eigen::MatrixXd k = corr_from_distance(d, theta.range);
  k.diagonal().array() += jitter;
  return k;
}

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, what);
  return llt;
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw Error(ErrorCode::LengthMismatch, "chol_solve dimension mismatch");
  return checked_llt(a, "chol_solve").solve(b);
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace pmst
