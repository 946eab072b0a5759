#include "pmst/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "pmst/error.hpp"

namespace pmst {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_station(const Station& s) {
  if (!std::isfinite(s.latitude) || s.latitude < -90.0 || s.latitude > 90.0)
    throw Error(ErrorCode::InvalidStation, "latitude out of range for station " + s.id);
  if (!std::isfinite(s.longitude) || s.longitude < -180.0 || s.longitude > 180.0)
    throw Error(ErrorCode::InvalidStation, "longitude out of range for station " + s.id);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == ',' && !quoted) {
      out.push_back(trim(line.substr(begin, i - begin)));
      begin = i + 1;
    }
  }
  out.push_back(trim(line.substr(begin)));
  return out;
}

bool is_missing_token(std::string_view f) { return f.empty() || f == "NA" || f == "NaN" || f == "nan"; }

double parse_double(std::string_view f, std::size_t line_no, std::string_view column) {
  double v = 0.0;
  if (!f.empty() && f.front() == '+') f.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || ptr != f.data() + f.size())
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ", column " + std::string(column) + ": '" + std::string(f) + "'");
  return v;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double great_circle_deg(const Station& a, const Station& b) {
  const double phi1 = a.latitude * kDegToRad;
  const double phi2 = b.latitude * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.longitude - a.longitude) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
  return 2.0 * std::asin(std::sqrt(h)) / kDegToRad;
}

Eigen::MatrixXd distance_matrix(std::span<const Station> stations) {
  const auto n = static_cast<Eigen::Index>(stations.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = great_circle_deg(stations[i], stations[j]);
  return d;
}

Eigen::MatrixXd cross_distance(std::span<const Station> rows, std::span<const Station> cols) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = great_circle_deg(rows[i], cols[j]);
  return d;
}

const std::vector<std::string>& default_covariate_names() {
  static const std::vector<std::string> names = {
      "Altitude",      "WE_temp_2m",  "WE_tot_precipitation", "WE_rh_mean", "WE_wind_speed_100m_mean",
      "WE_blh_layer_max", "LI_pigs_v2", "LI_bovine_v2",         "LA_hvi",     "LA_lvi"};
  return names;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<Station> stations, Date start, Eigen::MatrixXd response,
                 std::vector<Covariate> covariates)
    : stations_(std::move(stations)), start_(start), response_(std::move(response)), covariates_(std::move(covariates)) {
  const auto n = static_cast<Eigen::Index>(stations_.size());
  if (response_.rows() != n)
    throw Error(ErrorCode::InvalidArgument, "response rows do not match station count");
  std::set<std::string> ids;
  for (const auto& s : stations_) {
    check_station(s);
    if (!ids.insert(s.id).second) throw Error(ErrorCode::InvalidStation, "duplicate station id " + s.id);
  }
  std::set<std::string> names;
  for (const auto& c : covariates_) {
    if (c.values.rows() != response_.rows() || c.values.cols() != response_.cols())
      throw Error(ErrorCode::InvalidArgument, "covariate " + c.name + " has mismatched dimensions");
    if (!names.insert(c.name).second) throw Error(ErrorCode::InvalidArgument, "duplicate covariate " + c.name);
  }
  observed_ = response_.array().isNaN() == false;
}

std::optional<std::size_t> Dataset::station_index(std::string_view id) const {
  for (std::size_t i = 0; i < stations_.size(); ++i)
    if (stations_[i].id == id) return i;
  return std::nullopt;
}

unsigned Dataset::month(std::size_t t) const {
  const std::chrono::year_month_day ymd{date(t)};
  return static_cast<unsigned>(ymd.month());
}

std::vector<std::string> Dataset::covariate_names() const {
  std::vector<std::string> out;
  out.reserve(covariates_.size());
  for (const auto& c : covariates_) out.push_back(c.name);
  return out;
}

bool Dataset::has_covariate(std::string_view name) const {
  return std::any_of(covariates_.begin(), covariates_.end(), [&](const Covariate& c) { return c.name == name; });
}

const Eigen::MatrixXd& Dataset::covariate(std::string_view name) const {
  for (const auto& c : covariates_)
    if (c.name == name) return c.values;
  throw Error(ErrorCode::UnknownCovariate, std::string(name));
}

bool Dataset::covariates_present(std::size_t i, std::size_t t) const {
  const auto r = static_cast<Eigen::Index>(i);
  const auto c = static_cast<Eigen::Index>(t);
  return std::none_of(covariates_.begin(), covariates_.end(),
                      [&](const Covariate& cov) { return std::isnan(cov.values(r, c)); });
}

Dataset Dataset::subset(std::span<const std::size_t> station_indices) const {
  const auto m = static_cast<Eigen::Index>(station_indices.size());
  std::vector<Station> st;
  Eigen::MatrixXd resp(m, response_.cols());
  std::vector<Covariate> covs = covariates_;
  for (auto& c : covs) c.values.resize(m, response_.cols());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto src = static_cast<Eigen::Index>(station_indices[static_cast<std::size_t>(k)]);
    st.push_back(stations_.at(static_cast<std::size_t>(src)));
    resp.row(k) = response_.row(src);
    for (std::size_t c = 0; c < covs.size(); ++c) covs[c].values.row(k) = covariates_[c].values.row(src);
  }
  return Dataset(std::move(st), start_, std::move(resp), std::move(covs));
}

Dataset Dataset::without(std::span<const std::string> ids) const {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < stations_.size(); ++i)
    if (std::find(ids.begin(), ids.end(), stations_[i].id) == ids.end()) keep.push_back(i);
  return subset(keep);
}

Dataset Dataset::with_response(Eigen::MatrixXd response) const {
  return Dataset(stations_, start_, std::move(response), covariates_);
}

Dataset Dataset::with_covariate(std::string_view name, Eigen::MatrixXd values) const {
  auto covs = covariates_;
  bool found = false;
  for (auto& c : covs)
    if (c.name == name) {
      c.values = values;
      found = true;
    }
  if (!found) covs.push_back({std::string(name), std::move(values)});
  return Dataset(stations_, start_, response_, std::move(covs));
}

// ---------------------------------------------------------------------------
// CSV

Date parse_date(std::string_view iso) {
  iso = trim(iso);
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { return Error(ErrorCode::ParseError, "bad ISO date '" + std::string(iso) + "'"); };
  if (iso.size() < 10 || iso[4] != '-' || iso[7] != '-') throw bad();
  if (std::from_chars(iso.data(), iso.data() + 4, y).ec != std::errc()) throw bad();
  if (std::from_chars(iso.data() + 5, iso.data() + 7, m).ec != std::errc()) throw bad();
  if (std::from_chars(iso.data() + 8, iso.data() + 10, d).ec != std::errc()) throw bad();
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw bad();
  return Date{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty file " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_fields(line);
  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(ErrorCode::MissingColumn, name);
  };
  const std::size_t c_id = find_col(schema.station_id);
  const std::size_t c_lat = find_col(schema.latitude);
  const std::size_t c_lon = find_col(schema.longitude);
  const std::size_t c_date = find_col(schema.date);
  const std::size_t c_resp = find_col(schema.response);
  const std::size_t c_alt = find_col(schema.altitude);
  std::vector<std::size_t> c_cov;
  for (const auto& name : schema.covariates) c_cov.push_back(find_col(name));

  struct Row {
    std::size_t station;
    Date date;
    double response;
    std::vector<double> covariates;
  };
  std::vector<Station> stations;
  std::unordered_map<std::string, std::size_t> station_of;
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() < header.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has too few fields");
    const std::string id(f[c_id]);
    auto it = station_of.find(id);
    if (it == station_of.end()) {
      Station s{id, parse_double(f[c_lat], line_no, schema.latitude), parse_double(f[c_lon], line_no, schema.longitude),
                is_missing_token(f[c_alt]) ? kNaN : parse_double(f[c_alt], line_no, schema.altitude)};
      check_station(s);
      it = station_of.emplace(id, stations.size()).first;
      stations.push_back(std::move(s));
    }
    Row r;
    r.station = it->second;
    try {
      r.date = parse_date(f[c_date]);
    } catch (const Error&) {
      throw Error(ErrorCode::NonDailyDates, "line " + std::to_string(line_no) + ": unparseable date '" +
                                                std::string(f[c_date]) + "'");
    }
    r.response = is_missing_token(f[c_resp]) ? kNaN : parse_double(f[c_resp], line_no, schema.response);
    if (!std::isnan(r.response) && options.require_positive_response && !(r.response > 0.0))
      throw Error(ErrorCode::NonPositiveResponse, "line " + std::to_string(line_no));
    for (std::size_t k = 0; k < c_cov.size(); ++k) {
      const auto field = f[c_cov[k]];
      if (is_missing_token(field))
        throw Error(ErrorCode::MissingCovariate,
                    schema.covariates[k] + " empty at line " + std::to_string(line_no));
      r.covariates.push_back(parse_double(field, line_no, schema.covariates[k]));
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no data rows in " + path.string());

  std::set<Date> distinct_dates;
  for (const auto& r : rows) distinct_dates.insert(r.date);
  const Date first = *distinct_dates.begin();
  const Date last = *distinct_dates.rbegin();
  const auto num_days = static_cast<std::size_t>((last - first).count() + 1);
  if (num_days != distinct_dates.size())
    throw Error(ErrorCode::NonDailyDates, "dates are not a contiguous daily range (" +
                                              std::to_string(distinct_dates.size()) + " distinct days spanning " +
                                              std::to_string(num_days) + ")");

  const auto n = static_cast<Eigen::Index>(stations.size());
  const auto T = static_cast<Eigen::Index>(num_days);
  Eigen::MatrixXd response = Eigen::MatrixXd::Constant(n, T, kNaN);
  std::vector<Dataset::Covariate> covs;
  for (const auto& name : schema.covariates) covs.push_back({name, Eigen::MatrixXd::Constant(n, T, kNaN)});
  Mask seen = Mask::Constant(n, T, false);
  for (const auto& r : rows) {
    const auto i = static_cast<Eigen::Index>(r.station);
    const auto t = static_cast<Eigen::Index>((r.date - first).count());
    if (seen(i, t))
      throw Error(ErrorCode::DuplicateStationDay,
                  stations[r.station].id + " on " + format_date(r.date));
    seen(i, t) = true;
    response(i, t) = r.response;
    for (std::size_t k = 0; k < covs.size(); ++k) covs[k].values(i, t) = r.covariates[k];
  }
  return Dataset(std::move(stations), first, std::move(response), std::move(covs));
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << schema.station_id << ',' << schema.latitude << ',' << schema.longitude << ',' << schema.date << ','
      << schema.response;
  const bool altitude_is_covariate =
      std::find(schema.covariates.begin(), schema.covariates.end(), schema.altitude) != schema.covariates.end();
  if (!altitude_is_covariate) out << ',' << schema.altitude;
  for (const auto& c : schema.covariates) out << ',' << c;
  out << '\n';
  std::vector<const Eigen::MatrixXd*> cov;
  for (const auto& name : schema.covariates) cov.push_back(&ds.covariate(name));
  for (std::size_t i = 0; i < ds.num_stations(); ++i) {
    const Station& s = ds.station(i);
    for (std::size_t t = 0; t < ds.num_days(); ++t) {
      if (!ds.covariates_present(i, t)) continue;
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(t);
      out << s.id << ',' << format_double(s.latitude) << ',' << format_double(s.longitude) << ','
          << format_date(ds.date(t)) << ',' << format_double(ds.response()(r, c));
      if (!altitude_is_covariate) out << ',' << format_double(s.altitude);
      for (const auto* m : cov) out << ',' << format_double((*m)(r, c));
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Model specification and design

std::vector<std::string> ModelSpec::covariates() const {
  std::vector<std::string> out = linear_terms;
  out.insert(out.end(), smooth_terms.begin(), smooth_terms.end());
  return out;
}

void ModelSpec::validate(const Dataset& ds) const {
  std::set<std::string> seen;
  for (const auto& name : covariates()) {
    if (!seen.insert(name).second) throw Error(ErrorCode::InvalidSpec, "term listed twice: " + name);
    if (!ds.has_covariate(name)) throw Error(ErrorCode::UnknownCovariate, name);
  }
}

ModelSpec reference_linear_spec() {
  ModelSpec spec;
  spec.linear_terms = {"Altitude",   "WE_wind_speed_100m_mean", "WE_tot_precipitation", "WE_temp_2m",
                       "WE_rh_mean", "WE_blh_layer_max",        "LI_pigs_v2",           "LI_bovine_v2",
                       "LA_lvi",     "LA_hvi"};
  return spec;
}

ModelSpec reference_additive_spec() {
  ModelSpec spec;
  spec.linear_terms = {"Altitude"};
  spec.smooth_terms = {"WE_wind_speed_100m_mean", "WE_temp_2m", "WE_tot_precipitation", "WE_rh_mean",
                       "WE_blh_layer_max",        "LA_lvi",     "LA_hvi",               "LI_pigs_v2",
                       "LI_bovine_v2"};
  return spec;
}

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"response_name", spec.response_name},
          {"linear_terms", spec.linear_terms},
          {"smooth_terms", spec.smooth_terms},
          {"include_month_dummies", spec.include_month_dummies}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.response_name = j.value("response_name", spec.response_name);
  spec.linear_terms = j.value("linear_terms", std::vector<std::string>{});
  spec.smooth_terms = j.value("smooth_terms", std::vector<std::string>{});
  spec.include_month_dummies = j.value("include_month_dummies", true);
  return spec;
}

nlohmann::json stations_to_json(std::span<const Station> stations) {
  auto out = nlohmann::json::array();
  for (const auto& s : stations)
    out.push_back({{"id", s.id}, {"latitude", s.latitude}, {"longitude", s.longitude}, {"altitude", s.altitude}});
  return out;
}

std::vector<Station> stations_from_json(const nlohmann::json& j) {
  std::vector<Station> out;
  for (const auto& s : j)
    out.push_back({s.at("id").get<std::string>(), s.at("latitude").get<double>(), s.at("longitude").get<double>(),
                   s.value("altitude", 0.0)});
  return out;
}

std::optional<std::size_t> DesignMatrix::column(std::string_view label) const {
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] == label) return j;
  return std::nullopt;
}

std::vector<std::string> design_labels(const ModelSpec& spec) {
  std::vector<std::string> labels = {"(Intercept)"};
  if (spec.include_month_dummies) labels.insert(labels.end(), month_labels().begin(), month_labels().end());
  for (const auto& c : spec.covariates()) labels.push_back(c);
  return labels;
}

Eigen::VectorXd design_row(const Dataset& ds, const ModelSpec& spec, std::size_t station, std::size_t day) {
  const auto covs = spec.covariates();
  const Eigen::Index months = spec.include_month_dummies ? 11 : 0;
  Eigen::VectorXd row = Eigen::VectorXd::Zero(1 + months + static_cast<Eigen::Index>(covs.size()));
  row(0) = 1.0;
  if (months > 0) {
    const unsigned m = ds.month(day);
    if (m >= 2) row(static_cast<Eigen::Index>(m) - 1) = 1.0;
  }
  for (std::size_t k = 0; k < covs.size(); ++k)
    row(1 + months + static_cast<Eigen::Index>(k)) =
        ds.covariate(covs[k])(static_cast<Eigen::Index>(station), static_cast<Eigen::Index>(day));
  return row;
}

DesignMatrix design_matrix(const Dataset& ds, const ModelSpec& spec) {
  spec.validate(ds);
  DesignMatrix dm;
  dm.labels = design_labels(spec);
  dm.num_stations = ds.num_stations();
  dm.num_days = ds.num_days();
  const auto rows = static_cast<Eigen::Index>(dm.num_stations * dm.num_days);
  const auto cols = static_cast<Eigen::Index>(dm.labels.size());
  dm.x = Eigen::MatrixXd::Zero(rows, cols);
  dm.observed.assign(static_cast<std::size_t>(rows), false);
  const Eigen::Index months = spec.include_month_dummies ? 11 : 0;
  std::vector<const Eigen::MatrixXd*> cov;
  for (const auto& c : spec.covariates()) cov.push_back(&ds.covariate(c));
  for (std::size_t i = 0; i < dm.num_stations; ++i) {
    for (std::size_t t = 0; t < dm.num_days; ++t) {
      const auto r = static_cast<Eigen::Index>(dm.row(i, t));
      dm.x(r, 0) = 1.0;
      if (months > 0) {
        const unsigned m = ds.month(t);
        if (m >= 2) dm.x(r, static_cast<Eigen::Index>(m) - 1) = 1.0;
      }
      for (std::size_t k = 0; k < cov.size(); ++k)
        dm.x(r, 1 + months + static_cast<Eigen::Index>(k)) =
            (*cov[k])(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
      dm.observed[static_cast<std::size_t>(r)] = ds.observed(i, t);
    }
  }
  return dm;
}

std::vector<PredictionTarget> make_targets(const Dataset& ds, const ModelSpec& spec, std::size_t station_index,
                                           Date reference_start, bool with_lagged_response) {
  std::vector<PredictionTarget> out;
  out.reserve(ds.num_days());
  const auto offset = (ds.start_date() - reference_start).count();
  const auto i = static_cast<Eigen::Index>(station_index);
  for (std::size_t t = 0; t < ds.num_days(); ++t) {
    PredictionTarget target;
    target.station = ds.station(station_index);
    target.day = static_cast<std::ptrdiff_t>(t) + offset;
    target.x = design_row(ds, spec, station_index, t);
    if (with_lagged_response && t > 0 && ds.observed(station_index, t - 1)) {
      target.previous_response = ds.response()(i, static_cast<Eigen::Index>(t) - 1);
      target.previous_x = design_row(ds, spec, station_index, t - 1);
    }
    out.push_back(std::move(target));
  }
  return out;
}

}  // namespace pmst
