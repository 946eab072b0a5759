#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pmst/data.hpp"
#include "pmst/model.hpp"
#include "pmst/variogram.hpp"

namespace pmst {

struct Metrics {
  std::size_t n = 0;
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> r2;  // absent when the observations are constant
};

/// Throws LengthMismatch, InsufficientData (fewer than 2 pairs).
Metrics metrics(std::span<const double> obs, std::span<const double> pred);
/// 1 - (1 - r2) (n - 1) / (n - k - 1) for k large-scale parameters.
std::optional<double> adjusted_r2(const Metrics& m, double k);

struct InSampleMetrics {
  Metrics large_scale;  // LS
  Metrics full;         // FM
};
/// Both components on every observed training cell. Full-model targets carry
/// the station's previous-day response where observed.
InSampleMetrics in_sample_metrics(const FittedModel& model, const Dataset& train);

struct FoldResult {
  std::string station_id;
  bool failed = false;
  std::string error;
  std::vector<Date> dates;  // observed days of the held-out station
  std::vector<double> observed;
  std::vector<double> predicted;
  std::optional<Metrics> metrics;
  nlohmann::json model;  // fitted model document, when requested
};

struct CVReport {
  std::string model;
  std::vector<std::string> excluded;
  std::string training_rule;
  std::vector<FoldResult> folds;  // sorted by station id
  std::optional<Metrics> pooled;  // over every held-out (station, day)

  [[nodiscard]] std::size_t num_failed() const;
};

struct CvOptions {
  /// Station ids to validate; empty means every station not excluded.
  std::vector<std::string> validate_ids;
  /// Removed from training and validation.
  std::vector<std::string> exclude_ids;
  /// Attach the held-out station's own previous-day response to its targets.
  bool use_lagged_response = false;
  unsigned threads = 1;
  bool keep_models = false;
};

using FitFunction = std::function<std::unique_ptr<FittedModel>(const Dataset&)>;

/// Leave-one-station-out cross-validation: each fold fits on a Dataset built
/// without the held-out station and the exclusions, then predicts the
/// held-out series. Fold failures are recorded, not thrown.
CVReport losocv(const Dataset& ds, const ModelConfig& config, const CvOptions& options = {});
CVReport losocv(const Dataset& ds, const FitFunction& fit, std::string model_name, const CvOptions& options = {});

/// Concatenated per-fold series of the successful folds.
Metrics pooled_metrics(const CVReport& report);

/// CSV columns station_id,date,observed,predicted,error.
void write_cv_predictions(const CVReport& report, const std::filesystem::path& path);
/// CSV columns station_id,n,mse,rmse,mae,r2.
void write_cv_summary(const CVReport& report, const std::filesystem::path& path);
nlohmann::json cv_pooled_json(const CVReport& report);

/// Centred moving average over `window` calendar days of the non-missing
/// values (NaN where the window holds none).
std::vector<double> moving_average(std::span<const double> values, int window = 15);
/// CSV columns station_id,date,ma_error with a 15-day centred window.
void write_moving_average_errors(const CVReport& report, const std::filesystem::path& path, int window = 15);

struct ResidualDiagnostics {
  std::array<double, 12> monthly_sd{};  // NaN where fewer than 2 residuals
  Eigen::MatrixXd acf;  // stations x (max_lag + 1); NaN where undefined
  std::optional<VariogramGrid> variogram;
};

/// Monthly pooled SD, per-station sample ACF over aligned non-missing pairs,
/// and the residual space-time variogram. Statistics that cannot be formed
/// are reported absent.
ResidualDiagnostics residual_diagnostics(const Eigen::MatrixXd& residuals, const Dataset& grid, int max_lag = 14,
                                         const VariogramSettings& vg = {}, unsigned threads = 1);
/// Observed minus full-model prediction on every observed training cell.
Eigen::MatrixXd model_residuals(const FittedModel& model, const Dataset& train);

}  // namespace pmst
