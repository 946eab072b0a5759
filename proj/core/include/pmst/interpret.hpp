#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmst/data.hpp"
#include "pmst/forest.hpp"
#include "pmst/gamm.hpp"
#include "pmst/hdgm.hpp"
#include "pmst/model.hpp"

namespace pmst {

struct PdpCurve {
  std::string variable;
  std::vector<double> grid;  // increasing
  std::vector<double> mean_prediction;
};

struct PdpOptions {
  int grid_size = 50;
  std::size_t max_rows = 5000;  // seeded subsample above this
  std::uint64_t seed = 1;
};

/// Partial dependence of a large-scale predictor on column `column` of the
/// design rows: the column is set to each of `grid_size` equidistant values
/// from its minimum to its maximum and the predictions are averaged.
PdpCurve pdp(const std::function<double(const Eigen::VectorXd&)>& large_scale, const Eigen::MatrixXd& rows,
             Eigen::Index column, std::string variable, const PdpOptions& options = {});
/// Over the observed cells of `ds`. Throws UnknownVariable when `variable`
/// is not one of the model's covariates.
PdpCurve pdp(const FittedModel& model, const Dataset& ds, const std::string& variable, const PdpOptions& options = {});
/// CSV columns value,mean_prediction.
void write_pdp_csv(const PdpCurve& curve, const std::filesystem::path& path);

struct ImportanceRow {
  std::string variable;
  double inc_mse = 0.0;
  double inc_mse_pct = 0.0;  // relative to the baseline MSE
  double sd = 0.0;           // across repeats
};

struct ImportanceTable {
  double baseline_mse = 0.0;
  int n_repeat = 0;
  std::uint64_t seed = 0;
  std::vector<ImportanceRow> rows;  // sorted by inc_mse, descending
};

/// Out-of-bag permutation importance: for each repeat and column, the
/// column is permuted across rows and every row is predicted by the trees
/// for which it is out of bag. IncMSE is the mean increase over the OOB MSE.
/// `x`, `y` must be the forest's training rows.
ImportanceTable permutation_importance(const forest::Forest& forest, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, int n_repeat = 10, std::uint64_t seed = 1,
                                       unsigned threads = 1);
/// CSV columns variable,inc_mse,inc_mse_pct,sd.
void write_importance_csv(const ImportanceTable& table, const std::filesystem::path& path);

struct CoefficientRow {
  std::string name;
  double estimate = kNaN;
  double std_error = kNaN;
  double t = kNaN;
  double p = kNaN;
  double edf = kNaN;  // smooth rows only
};

/// Linear coefficients with GLS standard errors conditional on the fitted
/// covariance parameters; two-sided normal p-values.
std::vector<CoefficientRow> coefficient_report(const hdgm::HdgmParams& params, const std::vector<std::string>& labels,
                                               const Eigen::VectorXd& std_errors);
/// Linear rows as above (Bayesian posterior standard errors) plus one edf row per smooth.
std::vector<CoefficientRow> coefficient_report(const gamm::GammFit& fit);
/// CSV columns name,estimate,std_error,t,p,edf.
void write_coefficient_csv(const std::vector<CoefficientRow>& rows, const std::filesystem::path& path);

/// Two-sided standard normal tail probability.
double normal_two_sided_p(double z);

}  // namespace pmst
