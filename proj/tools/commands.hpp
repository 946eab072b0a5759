#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmst::cli {

/// Bad flags, unreadable paths or option values that do not fit the model.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path train;       // HDGM training data for predict/pdp/diagnose; defaults to input
  std::filesystem::path model_file;  // fitted model.json
  std::string model = "hdgm";
  std::filesystem::path out = ".";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool svg = false;

  // Model terms; empty optionals select the reference specification.
  std::optional<std::vector<std::string>> linear;
  std::optional<std::vector<std::string>> smooth;
  bool no_month_dummies = false;
  bool allow_nonpositive = false;

  // HDGM
  int max_iter = 200;
  double tol = 1e-6;
  // GAMM
  int knots = 10;
  bool no_ar = false;
  bool no_spatial = false;
  // RFSTK
  int n_tree = 500;
  int mtry = 0;
  int min_leaf = 5;
  int max_neighbors = 100;
  // Variograms
  int space_bins = 12;
  double max_distance = 0.0;
  int max_lag = 14;

  // cv
  std::vector<std::string> validate_only;
  std::optional<std::vector<std::string>> exclude;
  bool lagged_response = false;
  int ma_window = 15;

  // pdp / importance
  std::vector<std::string> variables;
  int grid = 50;
  int repeats = 10;

  // simulate
  std::size_t stations = 20;
  std::size_t days = 365;
  std::string start = "2016-01-01";
  double g = 0.72;
  double theta = 0.79;
  double v = 3.0;
  double sigma2 = 2.0;
  std::vector<double> beta;
  std::optional<std::vector<std::string>> sim_covariates;
  std::string scheme = "seasonal";
  double missing_rate = 0.0;
  std::string missing_pattern = "random";
  int block_length = 10;
};

/// Each command writes its artifacts and manifest.json under `out`.
/// Throws ConfigError (exit 2) or pmst::Error / std::exception (exit 2 or 3).
void cmd_fit(const RunOptions& o);
void cmd_predict(const RunOptions& o);
void cmd_cv(const RunOptions& o);
void cmd_variogram(const RunOptions& o);
void cmd_diagnose(const RunOptions& o);
void cmd_pdp(const RunOptions& o);
void cmd_importance(const RunOptions& o);
void cmd_simulate(const RunOptions& o);

/// The high-altitude outlier station left out of cross-validation by default.
inline const std::vector<std::string> kDefaultExclusions = {"Moggio"};

}  // namespace pmst::cli
