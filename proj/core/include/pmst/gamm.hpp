#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pmst/data.hpp"
#include "pmst/spline.hpp"

namespace pmst::gamm {

struct GammOptions {
  int knots = 10;  // basis dimension per smooth
  double tol = 1e-6;
  int max_iter = 50;
  /// Estimate the AR(1) coefficient by iterated quasi-differencing. When
  /// false the model is a plain penalised fit with g = 0.
  bool estimate_ar = true;
  /// Quasi-difference with this g and skip its estimation.
  std::optional<double> fixed_g;
  /// Same smoothing parameter for every penalised block (skips GCV).
  std::optional<double> fixed_lambda;
  /// Include the spatial smooth C(s) with knots at the training stations.
  bool spatial = true;
  /// Spatial range in degrees; default is the max-distance rule.
  std::optional<double> theta;
  /// Choose theta among {1/4, 1/2, 1, 2, 4} x the default by final GCV.
  bool profile_theta = false;
  int sweeps = 2;
  double log10_lambda_min = -6.0;  // relative to each block's scale
  double log10_lambda_max = 7.0;
  double log10_lambda_step = 0.5;
  int threads = 1;
};

struct SmoothTerm {
  SplineBasis basis;
  Eigen::VectorXd coefs;  // curve values at the knots (centred over the training rows)
  double lambda = 0.0;
  double edf = 0.0;
};

struct GammFit {
  ModelSpec spec;
  std::vector<std::string> linear_labels;  // intercept, months, linear terms
  Eigen::VectorXd beta_linear;
  std::vector<SmoothTerm> smooths;
  std::vector<Station> spatial_knots;  // empty without a spatial smooth
  Eigen::VectorXd spatial_coefs;
  double spatial_lambda = 0.0;
  double spatial_edf = 0.0;
  double theta_gamm = 1.0;
  double g_gamm = 0.0;
  double sigma2 = 0.0;  // residual variance of the quasi-differenced model
  double gcv = 0.0;
  double edf_total = 0.0;
  std::size_t num_rows = 0;
  /// Bayesian posterior covariance of [beta_linear, smooth coefs..., spatial coefs].
  Eigen::MatrixXd covariance;
  std::vector<std::string> dropped_columns;
  int iterations = 0;
  bool converged = false;
  /// Best GCV after every smoothing-parameter update of the final iteration.
  std::vector<double> gcv_trace;
  /// Penalised objective (RSS + penalty) after every update of the final iteration.
  std::vector<double> objective_trace;

  /// Linear terms plus smooths, without C(s) and the AR term.
  [[nodiscard]] double large_scale(const Eigen::VectorXd& x) const;
  [[nodiscard]] double spatial_effect(const Station& s) const;
  [[nodiscard]] double smooth_value(std::size_t j, double x) const;
  [[nodiscard]] Eigen::VectorXd linear_standard_errors() const;
};

/// Throws InvalidSpec, InsufficientData, TooFewDistinctValues,
/// RankDeficientDesign, NoConvergence.
GammFit fit_gamm(const Dataset& ds, const ModelSpec& spec, const GammOptions& options = {});

/// S + C(s), plus g (z(s,t-1) - S(s,t-1) - C(s)) when the target carries a
/// previous-day response and design row. Throws MissingTargetCovariate.
std::vector<Prediction> predict_gamm(const GammFit& fit, std::span<const PredictionTarget> targets);

struct CurvePoint {
  double x = 0.0, fitted = 0.0, lower = 0.0, upper = 0.0;
};
/// Fitted smooth with pointwise 95% bands on an equidistant grid over its knot range.
std::vector<CurvePoint> smooth_curve(const GammFit& fit, std::string_view covariate, int grid_size = 100);

nlohmann::json to_json(const GammFit& fit);
GammFit fit_from_json(const nlohmann::json& j);

}  // namespace pmst::gamm
