#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pmst/data.hpp"
#include "pmst/forest.hpp"
#include "pmst/kernels.hpp"
#include "pmst/variogram.hpp"

namespace pmst::rfstk {

struct KrigingOptions {
  int max_neighbors = 100;
  double jitter = 1e-8;  // relative to sill + nugget
};

struct RfstkOptions {
  forest::ForestConfig forest;
  VariogramSettings variogram;
  KrigingOptions kriging;
};

struct RfstkFit {
  ModelSpec spec;
  forest::Forest forest;  // features: the design columns after the intercept
  SeparableCorrParams residual_cov;
  VariogramGrid residual_variogram;
  std::vector<Station> stations;
  Eigen::MatrixXd train_residuals;  // stations x days, NaN where unobserved
  KrigingOptions kriging;

  /// Forest prediction from a full design row (intercept included).
  [[nodiscard]] double large_scale(const Eigen::VectorXd& x) const;
};

struct TrainingRows {
  Eigen::MatrixXd x;  // design columns after the intercept
  Eigen::VectorXd y;
  std::vector<Eigen::Index> cells;  // station-major design row of each entry
  std::vector<std::string> features;
};

/// Observed cells with complete covariates, in design-row order. These are
/// exactly the rows the forest of fit_rfstk is trained on.
TrainingRows training_rows(const Dataset& ds, const ModelSpec& spec);

/// Forest on the shared design matrix, then a separable exponential model
/// fitted to the empirical variogram of the in-sample forest residuals.
RfstkFit fit_rfstk(const Dataset& ds, const ModelSpec& spec, const RfstkOptions& options = {});

struct KrigingResult {
  double value = 0.0;
  double variance = kNaN;
  std::vector<std::pair<std::size_t, std::size_t>> neighbors;  // (station, day)
  Eigen::VectorXd weights;
  bool fallback = false;  // no neighbours: value 0
};

/// Ordinary kriging of the training residuals at (station, day) using the
/// nearest residuals under d = h / theta_s + |u| / theta_t. The nugget sits
/// on the data diagonal only, so the predictor targets the smooth part.
KrigingResult krige_residual(const RfstkFit& fit, const Station& station, std::ptrdiff_t day);

/// forest(x) + kriged residual. Throws MissingTargetCovariate.
std::vector<Prediction> predict_rfstk(const RfstkFit& fit, std::span<const PredictionTarget> targets);

nlohmann::json to_json(const RfstkFit& fit);
RfstkFit fit_from_json(const nlohmann::json& j);

}  // namespace pmst::rfstk
