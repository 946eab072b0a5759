#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace pmst {

using Date = std::chrono::sys_days;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
/// Kilometres per degree of central angle on a sphere of radius 6371 km.
inline constexpr double kKmPerDegree = 111.195;

struct Station {
  std::string id;
  double latitude = 0.0;   // decimal degrees
  double longitude = 0.0;  // decimal degrees
  double altitude = 0.0;   // metres

  friend bool operator==(const Station&, const Station&) = default;
};

/// Central angle between two stations, in degrees of arc (haversine).
double great_circle_deg(const Station& a, const Station& b);

/// Pairwise great-circle distances (degrees), symmetric with a zero diagonal.
Eigen::MatrixXd distance_matrix(std::span<const Station> stations);
/// Rectangular distances rows x cols (degrees).
Eigen::MatrixXd cross_distance(std::span<const Station> rows, std::span<const Station> cols);

/// The covariates named in the Agrimonia-derived variable table, in table order.
const std::vector<std::string>& default_covariate_names();

/// Station-by-day panel. Missing responses are NaN in `response()` and
/// false in `observed()`; nothing is imputed here. Covariate cells are NaN
/// only where the source file had no row for that (station, day).
class Dataset {
 public:
  struct Covariate {
    std::string name;
    Eigen::MatrixXd values;  // stations x days
  };

  Dataset() = default;
  Dataset(std::vector<Station> stations, Date start, Eigen::MatrixXd response,
          std::vector<Covariate> covariates);

  [[nodiscard]] std::size_t num_stations() const { return stations_.size(); }
  [[nodiscard]] std::size_t num_days() const { return static_cast<std::size_t>(response_.cols()); }

  [[nodiscard]] std::span<const Station> stations() const { return stations_; }
  [[nodiscard]] const Station& station(std::size_t i) const { return stations_.at(i); }
  [[nodiscard]] std::optional<std::size_t> station_index(std::string_view id) const;

  [[nodiscard]] Date start_date() const { return start_; }
  [[nodiscard]] Date date(std::size_t t) const { return start_ + std::chrono::days(static_cast<long>(t)); }
  /// Calendar month 1..12 of day t.
  [[nodiscard]] unsigned month(std::size_t t) const;

  [[nodiscard]] const Eigen::MatrixXd& response() const { return response_; }
  [[nodiscard]] const Mask& observed() const { return observed_; }
  [[nodiscard]] bool observed(std::size_t i, std::size_t t) const { return observed_(i, t); }
  [[nodiscard]] std::size_t count_observed() const { return static_cast<std::size_t>(observed_.count()); }

  [[nodiscard]] std::span<const Covariate> covariates() const { return covariates_; }
  [[nodiscard]] std::vector<std::string> covariate_names() const;
  [[nodiscard]] bool has_covariate(std::string_view name) const;
  /// Throws UnknownCovariate.
  [[nodiscard]] const Eigen::MatrixXd& covariate(std::string_view name) const;
  /// True when every covariate is present for the cell.
  [[nodiscard]] bool covariates_present(std::size_t i, std::size_t t) const;

  /// New dataset restricted to the given stations, in the given order.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> station_indices) const;
  /// Dataset without the listed station ids (unknown ids are ignored).
  [[nodiscard]] Dataset without(std::span<const std::string> ids) const;
  /// Same grid and covariates with a replaced response matrix.
  [[nodiscard]] Dataset with_response(Eigen::MatrixXd response) const;
  /// Same grid with one covariate replaced.
  [[nodiscard]] Dataset with_covariate(std::string_view name, Eigen::MatrixXd values) const;

 private:
  std::vector<Station> stations_;
  Date start_{};
  Eigen::MatrixXd response_;
  Mask observed_;
  std::vector<Covariate> covariates_;
};

/// Column names used when reading and writing panel CSV files.
struct CsvSchema {
  std::string station_id = "IDStations";
  std::string latitude = "Latitude";
  std::string longitude = "Longitude";
  std::string date = "Time";
  std::string response = "AQ_pm25";
  std::string altitude = "Altitude";
  /// Covariate columns. The altitude column also fills Station::altitude.
  std::vector<std::string> covariates = default_covariate_names();
};

struct LoadOptions {
  /// Reject observed responses <= 0 (concentrations).
  bool require_positive_response = true;
};

/// Reads a long-format station-day CSV into a rectangular panel.
/// Errors: MissingColumn, NonDailyDates, DuplicateStationDay, MissingCovariate,
/// ParseError, NonPositiveResponse, Io.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                 const LoadOptions& options = {});
/// Writes every (station, day) cell that has covariates; values at full precision.
void write_csv(const Dataset& ds, const std::filesystem::path& path, const CsvSchema& schema = {});

Date parse_date(std::string_view iso);
std::string format_date(Date d);

struct ModelSpec {
  std::string response_name = "AQ_pm25";
  std::vector<std::string> linear_terms;
  std::vector<std::string> smooth_terms;
  bool include_month_dummies = true;

  /// Linear terms followed by smooth terms.
  [[nodiscard]] std::vector<std::string> covariates() const;
  /// Throws InvalidSpec on overlapping terms, UnknownCovariate on absent names.
  void validate(const Dataset& ds) const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Linear specification used for the regression-type large scale in the
/// reference analysis (intercept, months, altitude, weather, livestock, vegetation).
ModelSpec reference_linear_spec();
/// Same variables with every continuous covariate except altitude as a smooth.
ModelSpec reference_additive_spec();

inline const std::vector<std::string>& month_labels() {
  static const std::vector<std::string> labels = {"February", "March",     "April",   "May",
                                                  "June",     "July",      "August",  "September",
                                                  "October",  "November",  "December"};
  return labels;
}

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);
nlohmann::json stations_to_json(std::span<const Station> stations);
std::vector<Station> stations_from_json(const nlohmann::json& j);

struct DesignMatrix {
  Eigen::MatrixXd x;  // (stations*days) x columns, station-major rows
  std::vector<std::string> labels;
  std::vector<bool> observed;  // response present for the row
  std::size_t num_stations = 0;
  std::size_t num_days = 0;

  [[nodiscard]] std::size_t row(std::size_t station, std::size_t day) const { return station * num_days + day; }
  [[nodiscard]] std::optional<std::size_t> column(std::string_view label) const;
};

/// Column labels for a spec: "(Intercept)", the 11 month dummies (January is
/// the baseline), then covariates in spec order.
std::vector<std::string> design_labels(const ModelSpec& spec);
DesignMatrix design_matrix(const Dataset& ds, const ModelSpec& spec);
/// Design row of one (station, day) cell.
Eigen::VectorXd design_row(const Dataset& ds, const ModelSpec& spec, std::size_t station, std::size_t day);

/// A space-time point at which a fitted model is asked for a prediction.
/// `day` counts from the training dataset's start date; `x` is a full design
/// row (see design_labels). `previous_*` are optional (NaN / empty).
struct PredictionTarget {
  Station station;
  std::ptrdiff_t day = 0;
  Eigen::VectorXd x;
  double previous_response = kNaN;
  Eigen::VectorXd previous_x;
};

/// Targets for every day of station `station_index` in `ds`, with day offsets
/// measured from `reference_start`. When `with_lagged_response` is set, the
/// station's own response and design row at t-1 are attached where present.
std::vector<PredictionTarget> make_targets(const Dataset& ds, const ModelSpec& spec, std::size_t station_index,
                                           Date reference_start, bool with_lagged_response = false);

struct Prediction {
  double mean = kNaN;
  double variance = kNaN;
  bool fallback = false;  // model-specific degraded mode (e.g. no kriging neighbours)
};

}  // namespace pmst
