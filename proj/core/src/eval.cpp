#include "pmst/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pmst/error.hpp"
#include "pmst/parallel.hpp"

namespace pmst {

Metrics metrics(std::span<const double> obs, std::span<const double> pred) {
  if (obs.size() != pred.size()) throw Error(ErrorCode::LengthMismatch, "observed and predicted lengths differ");
  if (obs.size() < 2) throw Error(ErrorCode::InsufficientData, "metrics need at least 2 pairs");
  Metrics m;
  m.n = obs.size();
  const double n = static_cast<double>(m.n);
  double sse = 0.0, sae = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double e = obs[k] - pred[k];
    sse += e * e;
    sae += std::abs(e);
    mean += obs[k];
  }
  mean /= n;
  double sst = 0.0;
  for (double o : obs) sst += (o - mean) * (o - mean);
  m.mse = sse / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = sae / n;
  const bool constant = std::all_of(obs.begin(), obs.end(), [&](double o) { return o == obs[0]; });
  if (!constant) m.r2 = 1.0 - sse / sst;
  return m;
}

std::optional<double> adjusted_r2(const Metrics& m, double k) {
  const double n = static_cast<double>(m.n);
  if (!m.r2 || n - k - 1.0 <= 0.0) return std::nullopt;
  return 1.0 - (1.0 - *m.r2) * (n - 1.0) / (n - k - 1.0);
}

InSampleMetrics in_sample_metrics(const FittedModel& model, const Dataset& train) {
  std::vector<double> obs, ls, fm;
  for (std::size_t i = 0; i < train.num_stations(); ++i) {
    auto targets = make_targets(train, model.spec(), i, model.start_date(), true);
    std::vector<PredictionTarget> keep;
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (train.observed(i, t) && targets[t].x.allFinite()) {
        obs.push_back(train.response()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
        ls.push_back(model.large_scale(targets[t].x));
        keep.push_back(std::move(targets[t]));
      }
    for (const auto& p : model.predict(keep)) fm.push_back(p.mean);
  }
  return {metrics(obs, ls), metrics(obs, fm)};
}

std::size_t CVReport::num_failed() const {
  return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const FoldResult& f) { return f.failed; }));
}

Metrics pooled_metrics(const CVReport& report) {
  std::vector<double> obs, pred;
  for (const auto& f : report.folds) {
    if (f.failed) continue;
    obs.insert(obs.end(), f.observed.begin(), f.observed.end());
    pred.insert(pred.end(), f.predicted.begin(), f.predicted.end());
  }
  return metrics(obs, pred);
}

CVReport losocv(const Dataset& ds, const FitFunction& fit, std::string model_name, const CvOptions& options) {
  for (const auto& id : options.exclude_ids)
    if (!ds.station_index(id)) throw Error(ErrorCode::InvalidStation, "unknown station '" + id + "'");
  std::vector<std::string> validate = options.validate_ids;
  if (validate.empty())
    for (const auto& s : ds.stations()) validate.push_back(s.id);
  std::erase_if(validate, [&](const std::string& id) {
    return std::find(options.exclude_ids.begin(), options.exclude_ids.end(), id) != options.exclude_ids.end();
  });
  std::sort(validate.begin(), validate.end());
  validate.erase(std::unique(validate.begin(), validate.end()), validate.end());
  for (const auto& id : validate)
    if (!ds.station_index(id)) throw Error(ErrorCode::InvalidStation, "unknown station '" + id + "'");

  CVReport report;
  report.model = std::move(model_name);
  report.excluded = options.exclude_ids;
  report.training_rule = "all stations except the held-out one and the exclusions";
  report.folds.resize(validate.size());
  parallel_for(validate.size(), options.threads, [&](std::size_t k) {
    FoldResult& fold = report.folds[k];
    fold.station_id = validate[k];
    try {
      std::vector<std::string> drop = options.exclude_ids;
      drop.push_back(fold.station_id);
      // The training set is built without the held-out station before fitting.
      const Dataset train = ds.without(drop);
      const auto model = fit(train);
      const std::size_t idx = *ds.station_index(fold.station_id);
      auto targets = make_targets(ds, model->spec(), idx, train.start_date(), options.use_lagged_response);
      std::vector<PredictionTarget> keep;
      for (std::size_t t = 0; t < targets.size(); ++t)
        if (ds.observed(idx, t) && targets[t].x.allFinite()) {
          fold.dates.push_back(ds.date(t));
          fold.observed.push_back(ds.response()(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(t)));
          keep.push_back(std::move(targets[t]));
        }
      for (const auto& p : model->predict(keep)) fold.predicted.push_back(p.mean);
      if (fold.observed.size() >= 2) fold.metrics = metrics(fold.observed, fold.predicted);
      if (options.keep_models) fold.model = model->to_json();
    } catch (const std::exception& e) {
      fold.failed = true;
      fold.error = e.what();
      fold.dates.clear();
      fold.observed.clear();
      fold.predicted.clear();
    }
  });
  std::size_t pairs = 0;
  for (const auto& f : report.folds)
    if (!f.failed) pairs += f.observed.size();
  if (pairs >= 2) report.pooled = pooled_metrics(report);
  return report;
}

CVReport losocv(const Dataset& ds, const ModelConfig& config, const CvOptions& options) {
  return losocv(
      ds, [&config](const Dataset& train) { return fit_model(train, config); }, to_string(config.kind), options);
}

namespace {

std::string g6(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

nlohmann::json metrics_json(const std::optional<Metrics>& m) {
  if (!m) return nullptr;
  return {{"n", m->n},
          {"mse", m->mse},
          {"rmse", m->rmse},
          {"mae", m->mae},
          {"r2", m->r2 ? nlohmann::json(*m->r2) : nlohmann::json(nullptr)}};
}

}  // namespace

void write_cv_predictions(const CVReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "station_id,date,observed,predicted,error\n";
  for (const auto& f : report.folds)
    for (std::size_t k = 0; k < f.observed.size(); ++k)
      out << f.station_id << ',' << format_date(f.dates[k]) << ',' << g6(f.observed[k]) << ',' << g6(f.predicted[k])
          << ',' << g6(f.observed[k] - f.predicted[k]) << '\n';
}

void write_cv_summary(const CVReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "station_id,n,mse,rmse,mae,r2\n";
  for (const auto& f : report.folds) {
    if (!f.metrics) {
      out << f.station_id << ",0,NA,NA,NA,NA\n";
      continue;
    }
    const auto& m = *f.metrics;
    out << f.station_id << ',' << m.n << ',' << g6(m.mse) << ',' << g6(m.rmse) << ',' << g6(m.mae) << ','
        << g6(m.r2.value_or(kNaN)) << '\n';
  }
}

nlohmann::json cv_pooled_json(const CVReport& report) {
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& f : report.folds)
    if (f.failed) failed.push_back({{"station_id", f.station_id}, {"error", f.error}});
  return {{"model", report.model},
          {"excluded", report.excluded},
          {"training_rule", report.training_rule},
          {"folds", report.folds.size()},
          {"failed_folds", failed},
          {"pooled", metrics_json(report.pooled)}};
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  const std::ptrdiff_t before = (window - 1) / 2, after = window / 2;
  std::vector<double> out(values.size(), kNaN);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double s = 0.0;
    int c = 0;
    for (std::ptrdiff_t u = std::max<std::ptrdiff_t>(0, t - before); u <= std::min(n - 1, t + after); ++u)
      if (std::isfinite(values[static_cast<std::size_t>(u)])) {
        s += values[static_cast<std::size_t>(u)];
        ++c;
      }
    if (c > 0) out[static_cast<std::size_t>(t)] = s / c;
  }
  return out;
}

void write_moving_average_errors(const CVReport& report, const std::filesystem::path& path, int window) {
  auto out = open_out(path);
  out << "station_id,date,ma_error\n";
  for (const auto& f : report.folds) {
    if (f.dates.empty()) continue;
    // Place errors on the calendar so gaps count as days.
    const Date first = f.dates.front();
    const auto span_days = static_cast<std::size_t>((f.dates.back() - first).count()) + 1;
    std::vector<double> err(span_days, kNaN);
    for (std::size_t k = 0; k < f.dates.size(); ++k)
      err[static_cast<std::size_t>((f.dates[k] - first).count())] = f.observed[k] - f.predicted[k];
    const auto ma = moving_average(err, window);
    for (std::size_t t = 0; t < span_days; ++t)
      out << f.station_id << ',' << format_date(first + std::chrono::days(static_cast<long>(t))) << ',' << g6(ma[t])
          << '\n';
  }
}

ResidualDiagnostics residual_diagnostics(const Eigen::MatrixXd& residuals, const Dataset& grid, int max_lag,
                                         const VariogramSettings& vg, unsigned threads) {
  if (residuals.rows() != static_cast<Eigen::Index>(grid.num_stations()) ||
      residuals.cols() != static_cast<Eigen::Index>(grid.num_days()))
    throw Error(ErrorCode::LengthMismatch, "residual matrix does not match the dataset grid");
  if (max_lag < 0) throw Error(ErrorCode::InvalidArgument, "max_lag must be >= 0");
  ResidualDiagnostics d;
  std::array<double, 12> sum{}, sumsq{};
  std::array<std::size_t, 12> count{};
  for (Eigen::Index t = 0; t < residuals.cols(); ++t) {
    const unsigned m = grid.month(static_cast<std::size_t>(t)) - 1;
    for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
      const double r = residuals(i, t);
      if (!std::isfinite(r)) continue;
      sum[m] += r;
      ++count[m];
    }
  }
  for (Eigen::Index t = 0; t < residuals.cols(); ++t) {
    const unsigned m = grid.month(static_cast<std::size_t>(t)) - 1;
    const double mean = count[m] > 0 ? sum[m] / static_cast<double>(count[m]) : 0.0;
    for (Eigen::Index i = 0; i < residuals.rows(); ++i)
      if (std::isfinite(residuals(i, t))) sumsq[m] += (residuals(i, t) - mean) * (residuals(i, t) - mean);
  }
  for (std::size_t m = 0; m < 12; ++m)
    d.monthly_sd[m] = count[m] >= 2 ? std::sqrt(sumsq[m] / static_cast<double>(count[m] - 1)) : kNaN;

  d.acf = Eigen::MatrixXd::Constant(residuals.rows(), max_lag + 1, kNaN);
  for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
    const Eigen::RowVectorXd x = residuals.row(i);
    double mean = 0.0;
    int n = 0;
    for (Eigen::Index t = 0; t < x.size(); ++t)
      if (std::isfinite(x(t))) {
        mean += x(t);
        ++n;
      }
    if (n < 2) continue;
    mean /= n;
    double c0 = 0.0;
    for (Eigen::Index t = 0; t < x.size(); ++t)
      if (std::isfinite(x(t))) c0 += (x(t) - mean) * (x(t) - mean);
    if (!(c0 > 0.0)) continue;
    for (int k = 0; k <= max_lag; ++k) {
      double ck = 0.0;
      for (Eigen::Index t = 0; t + k < x.size(); ++t)
        if (std::isfinite(x(t)) && std::isfinite(x(t + k))) ck += (x(t) - mean) * (x(t + k) - mean);
      d.acf(i, k) = ck / c0;
    }
  }

  try {
    d.variogram = empirical_variogram(residuals, grid.stations(), default_space_edges(grid.stations(), vg),
                                      vg.max_time_lag, threads);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyField && e.code() != ErrorCode::InvalidArgument &&
        e.code() != ErrorCode::DegenerateGrid)
      throw;
  }
  return d;
}

Eigen::MatrixXd model_residuals(const FittedModel& model, const Dataset& train) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(train.num_stations()),
                                                static_cast<Eigen::Index>(train.num_days()), kNaN);
  for (std::size_t i = 0; i < train.num_stations(); ++i) {
    auto targets = make_targets(train, model.spec(), i, model.start_date(), true);
    std::vector<PredictionTarget> keep;
    std::vector<std::size_t> days;
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (train.observed(i, t) && targets[t].x.allFinite()) {
        keep.push_back(std::move(targets[t]));
        days.push_back(t);
      }
    const auto pred = model.predict(keep);
    for (std::size_t k = 0; k < days.size(); ++k) {
      const auto ii = static_cast<Eigen::Index>(i), tt = static_cast<Eigen::Index>(days[k]);
      r(ii, tt) = train.response()(ii, tt) - pred[k].mean;
    }
  }
  return r;
}

}  // namespace pmst
