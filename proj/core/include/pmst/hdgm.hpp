#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pmst/data.hpp"

namespace pmst::hdgm {

/// Linear fixed effects plus a latent AR(1) state with exponential spatial
/// innovations, observed through a scale factor with white noise:
///   y(s,t) = x(s,t)'beta + v * xi(s,t) + eps(s,t)
///   xi(., t) = g * xi(., t-1) + eta(., t),  eta ~ N(0, Gamma(theta))
struct HdgmParams {
  Eigen::VectorXd beta;
  double g = 0.5;
  double theta = 1.0;  // degrees of arc
  double v = 1.0;
  double sigma2_eps = 1.0;

  /// Throws InvalidArgument when |g| >= 1, theta <= 0, v < 0 or sigma2_eps <= 0.
  void validate() const;
};

/// Smoothed latent moments on the training grid.
struct SmoothedState {
  Eigen::MatrixXd mean;      // stations x days, E[xi | all data]
  Eigen::MatrixXd variance;  // stations x days, Var[xi | all data] diagonals
  Eigen::MatrixXd lag1_cov;  // stations x days, Cov[xi_t, xi_{t-1} | all data] diagonals (column 0 unused)
};

/// Sufficient statistics of the latent process for the M-step.
struct StateMoments {
  Eigen::MatrixXd first;  // E[xi_1 xi_1']
  Eigen::MatrixXd s11;    // sum_{t>=2} E[xi_t xi_t']
  Eigen::MatrixXd s00;    // sum_{t>=2} E[xi_{t-1} xi_{t-1}']
  Eigen::MatrixXd s10;    // sum_{t>=2} E[xi_t xi_{t-1}']
  std::size_t num_days = 0;
};

struct KalmanResult {
  double loglik = 0.0;
  SmoothedState smoothed;
  StateMoments moments;
  /// Full smoothed covariance per day; filled only when requested.
  std::vector<Eigen::MatrixXd> smoothed_cov;
};

struct KalmanOptions {
  bool smooth = true;
  bool keep_covariances = false;
  double jitter = 1e-8;
};

/// Exact Gaussian log-likelihood by Kalman filtering (missing responses drop
/// rows of the observation equation; the first state is drawn from the
/// stationary law N(0, Gamma / (1 - g^2))) plus fixed-interval smoothing.
/// Throws AllMissing, NotPositiveDefinite, InvalidArgument.
KalmanResult kalman_loglik(const Dataset& ds, const ModelSpec& spec, const HdgmParams& p,
                           const KalmanOptions& options = {});
/// Same, from a prebuilt design matrix.
KalmanResult kalman_loglik(const Dataset& ds, const DesignMatrix& design, const HdgmParams& p,
                           const KalmanOptions& options = {});

struct EmOptions {
  double tol = 1e-6;  // relative log-likelihood change
  int max_iter = 200;
  double theta_min = 0.01;
  double theta_max = 10.0;
  /// Estimate theta (otherwise it stays at its initial value).
  bool update_theta = true;
};

struct EmResult {
  HdgmParams params;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;  // false: iteration cap reached, best-so-far returned
  std::vector<std::string> labels;
  /// Design columns that were identically zero on observed rows; their
  /// coefficients are fixed at 0.
  std::vector<std::string> dropped_columns;
};

/// Default start: beta from OLS, g = 0.5, theta = median pairwise distance,
/// v^2 and sigma2_eps each half the OLS residual variance.
HdgmParams default_init(const Dataset& ds, const ModelSpec& spec);

/// Maximum likelihood by EM: Kalman-smoother E-step; joint closed-form update
/// of (beta, v), then sigma2_eps; exact 1-D maximisation for g; golden-section
/// search for theta. Stops on relative log-likelihood change < tol.
EmResult em_fit(const Dataset& ds, const ModelSpec& spec, const HdgmParams& init, const EmOptions& options = {});

/// X' Sigma^{-1} X and X' Sigma^{-1} y under the marginal covariance of the
/// fitted model, computed by filtering the design columns.
struct GlsMoments {
  Eigen::MatrixXd xtsx;
  Eigen::VectorXd xtsy;
};
GlsMoments gls_moments(const Dataset& ds, const ModelSpec& spec, const HdgmParams& p, double jitter = 1e-8);
/// Standard errors of beta conditional on the covariance parameters
/// (sqrt of diag of (X' Sigma^{-1} X)^{-1}); NaN for dropped columns.
Eigen::VectorXd gls_standard_errors(const Dataset& ds, const ModelSpec& spec, const HdgmParams& p);

/// Kriging of the smoothed latent state onto arbitrary stations and days of
/// the training range.
class Predictor {
 public:
  Predictor(HdgmParams params, Dataset train, ModelSpec spec, double jitter = 1e-8);

  /// Throws TargetOutsideDateRange, MissingTargetCovariate.
  [[nodiscard]] std::vector<Prediction> predict(std::span<const PredictionTarget> targets) const;
  [[nodiscard]] double large_scale(const Eigen::VectorXd& x) const;

  [[nodiscard]] const HdgmParams& params() const { return params_; }
  [[nodiscard]] const Dataset& train() const { return train_; }
  [[nodiscard]] const ModelSpec& spec() const { return spec_; }
  [[nodiscard]] const SmoothedState& smoothed() const { return smoothed_; }
  [[nodiscard]] double loglik() const { return loglik_; }

 private:
  HdgmParams params_;
  Dataset train_;
  ModelSpec spec_;
  double jitter_;
  SmoothedState smoothed_;
  std::vector<Eigen::MatrixXd> smoothed_cov_;
  Eigen::LLT<Eigen::MatrixXd> gamma_llt_;
  double loglik_ = 0.0;
};

/// Convenience wrapper around Predictor.
std::vector<Prediction> predict(const HdgmParams& params, const Dataset& train, const ModelSpec& spec,
                                std::span<const PredictionTarget> targets);

nlohmann::json to_json(const HdgmParams& p);
HdgmParams params_from_json(const nlohmann::json& j);

}  // namespace pmst::hdgm
