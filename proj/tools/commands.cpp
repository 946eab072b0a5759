#include "commands.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include <nlohmann/json.hpp>

#include "pmst/error.hpp"
#include "pmst/eval.hpp"
#include "pmst/interpret.hpp"
#include "pmst/model.hpp"
#include "pmst/simulate.hpp"
#include "pmst/variogram.hpp"
#include "pmst/version.hpp"
#include "svg.hpp"

namespace pmst::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// FNV-1a: stable across platforms and runs, unlike std::hash.
std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string g6(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

void require_file(const fs::path& p, const std::string& flag) {
  if (p.empty()) throw ConfigError(flag + " is required");
  if (!fs::is_regular_file(p)) throw ConfigError(flag + ": no such file '" + p.string() + "'");
}

/// Collects artifact names and writes the manifest last.
class Artifacts {
 public:
  explicit Artifacts(const RunOptions& o) : dir_(o.out), seed_(o.seed) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (!fs::is_directory(dir_)) throw ConfigError("--out: cannot create directory '" + dir_.string() + "'");
  }

  fs::path add(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    return dir_ / name;
  }

  void write_manifest(const std::string& command, const json& config, bool seed_used) const {
    json files = json::array();
    for (const auto& name : files_) {
      const std::string bytes = read_file(dir_ / name);
      files.push_back({{"path", name}, {"bytes", bytes.size()}, {"fnv1a64", hex(fnv1a(bytes))}});
    }
    json m = {{"tool", "pmst"},
              {"version", PMST_VERSION_STRING},
              {"command", command},
              {"config", config},
              {"config_hash", hex(fnv1a(config.dump()))},
              {"seed", seed_used ? json(seed_) : json(nullptr)},
              {"files", files}};
    auto out = open_out(dir_ / "manifest.json");
    out << m.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
};

json file_identity(const fs::path& p) { return {{"fnv1a64", hex(fnv1a(read_file(p)))}}; }

ModelSpec spec_for(const RunOptions& o, ModelKind kind) {
  if (!o.linear && !o.smooth) {
    ModelSpec s = kind == ModelKind::Gamm ? reference_additive_spec() : reference_linear_spec();
    s.include_month_dummies = !o.no_month_dummies;
    return s;
  }
  ModelSpec s;
  if (o.linear) s.linear_terms = *o.linear;
  if (o.smooth) s.smooth_terms = *o.smooth;
  s.include_month_dummies = !o.no_month_dummies;
  if (kind != ModelKind::Gamm && !s.smooth_terms.empty())
    throw ConfigError("--smooth applies to the gamm model only");
  return s;
}

ModelConfig model_config(const RunOptions& o, ModelKind kind, unsigned inner_threads) {
  if (o.max_iter < 1 || !(o.tol > 0.0)) throw ConfigError("--max-iter must be >= 1 and --tol > 0");
  if (o.knots < 4) throw ConfigError("--knots must be >= 4");
  if (o.n_tree < 1 || o.min_leaf < 1 || o.mtry < 0 || o.max_neighbors < 1)
    throw ConfigError("forest and kriging settings must be positive");
  if (o.space_bins < 1 || o.max_lag < 1) throw ConfigError("--space-bins and --max-lag must be >= 1");
  ModelConfig c;
  c.kind = kind;
  c.spec = spec_for(o, kind);
  c.em.max_iter = o.max_iter;
  c.em.tol = o.tol;
  c.gamm.knots = o.knots;
  c.gamm.estimate_ar = !o.no_ar;
  c.gamm.spatial = !o.no_spatial;
  c.gamm.threads = static_cast<int>(inner_threads);
  c.rfstk.forest.n_tree = o.n_tree;
  c.rfstk.forest.mtry = o.mtry;
  c.rfstk.forest.min_leaf = o.min_leaf;
  c.rfstk.forest.seed = o.seed;
  c.rfstk.forest.threads = inner_threads;
  c.rfstk.kriging.max_neighbors = o.max_neighbors;
  c.rfstk.variogram.num_space_bins = o.space_bins;
  c.rfstk.variogram.max_distance = o.max_distance;
  c.rfstk.variogram.max_time_lag = o.max_lag;
  return c;
}

/// Options that change the fitted model, and nothing else.
json model_config_json(const RunOptions& o, const ModelConfig& c) {
  json j = {{"model", to_string(c.kind)}, {"spec", to_json(c.spec)}};
  switch (c.kind) {
    case ModelKind::Hdgm:
      j["max_iter"] = o.max_iter;
      j["tol"] = o.tol;
      break;
    case ModelKind::Gamm:
      j["knots"] = o.knots;
      j["estimate_ar"] = !o.no_ar;
      j["spatial"] = !o.no_spatial;
      break;
    case ModelKind::Rfstk:
      j["n_tree"] = o.n_tree;
      j["mtry"] = o.mtry;
      j["min_leaf"] = o.min_leaf;
      j["max_neighbors"] = o.max_neighbors;
      j["space_bins"] = o.space_bins;
      j["max_distance"] = o.max_distance;
      j["max_lag"] = o.max_lag;
      j["seed"] = o.seed;
      break;
    case ModelKind::BaselineMean:
      break;
  }
  return j;
}

Dataset load(const RunOptions& o, const fs::path& path, const std::vector<std::string>& covariates) {
  CsvSchema schema;
  schema.covariates = covariates;
  LoadOptions opt;
  opt.require_positive_response = !o.allow_nonpositive;
  return load_csv(path, schema, opt);
}

ModelKind parse_kind(const std::string& name) {
  try {
    return model_kind_from_string(name);
  } catch (const Error&) {
    throw ConfigError("--model must be one of hdgm, gamm, rfstk, baseline-mean (got '" + name + "')");
  }
}

struct LoadedModel {
  json document;
  std::unique_ptr<FittedModel> model;
  json identity;  // for the config hash
};

/// model.json plus, for HDGM, the training data it conditions on.
LoadedModel load_model(const RunOptions& o) {
  require_file(o.model_file, "--model");
  LoadedModel m;
  try {
    m.document = json::parse(read_file(o.model_file));
  } catch (const json::exception& e) {
    throw std::runtime_error("--model: not a model document (" + std::string(e.what()) + ")");
  }
  m.identity = file_identity(o.model_file);
  const std::string kind = m.document.value("model", "");
  if (kind == "hdgm") {
    const fs::path train = o.train.empty() ? o.input : o.train;
    require_file(train, "--train");
    const Dataset ds = load(o, train, spec_from_json(m.document.at("spec")).covariates());
    m.model = model_from_json(m.document, &ds);
    m.identity["train"] = file_identity(train);
  } else {
    m.model = model_from_json(m.document);
  }
  return m;
}

void write_insample(const InSampleMetrics& m, const FittedModel& model, const fs::path& path) {
  auto out = open_out(path);
  out << "component,n,mse,rmse,mae,r2,adj_r2\n";
  auto row = [&](const char* name, const Metrics& x, std::optional<double> adj) {
    out << name << ',' << x.n << ',' << g6(x.mse) << ',' << g6(x.rmse) << ',' << g6(x.mae) << ','
        << g6(x.r2.value_or(kNaN)) << ',' << g6(adj.value_or(kNaN)) << '\n';
  };
  const auto dof = model.large_scale_dof();
  row("LS", m.large_scale, dof ? adjusted_r2(m.large_scale, *dof - 1.0) : std::nullopt);
  row("FM", m.full, std::nullopt);
}

void write_variogram_svg(const VariogramGrid& vg, const fs::path& path, const std::string& title) {
  Plot plot{title, "distance (degrees)", "semivariance", {}, true};
  for (Eigen::Index t = 0; t < vg.gamma.cols(); ++t) {
    Series s{"lag " + std::to_string(t), {}, {}};
    for (Eigen::Index b = 0; b < vg.gamma.rows(); ++b) {
      s.x.push_back(vg.bin_center(b));
      s.y.push_back(vg.counts(b, t) > 0 ? vg.gamma(b, t) : kNaN);
    }
    plot.series.push_back(std::move(s));
  }
  write_svg(plot, path);
}

VariogramSettings variogram_settings(const RunOptions& o) {
  if (o.space_bins < 1 || o.max_lag < 0) throw ConfigError("--space-bins must be >= 1 and --max-lag >= 0");
  VariogramSettings s;
  s.num_space_bins = o.space_bins;
  s.max_distance = o.max_distance;
  s.max_time_lag = o.max_lag;
  return s;
}

json separable_json(const SeparableFit& f) {
  return {{"nugget", f.params.nugget},
          {"sill", f.params.sill},
          {"theta_s", f.params.theta_s},
          {"theta_t", f.params.theta_t},
          {"objective", f.objective},
          {"iterations", f.iterations}};
}

std::string safe_name(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

}  // namespace

void cmd_fit(const RunOptions& o) {
  require_file(o.input, "--input");
  const ModelKind kind = parse_kind(o.model);
  const ModelConfig cfg = model_config(o, kind, o.threads);
  Artifacts art(o);
  const Dataset ds = load(o, o.input, cfg.spec.covariates());
  const auto model = fit_model(ds, cfg);

  {
    auto out = open_out(art.add("model.json"));
    out << model->to_json().dump(1) << '\n';
  }
  write_insample(in_sample_metrics(*model, ds), *model, art.add("insample_metrics.csv"));

  switch (kind) {
    case ModelKind::Hdgm: {
      const auto& h = dynamic_cast<const HdgmModel&>(*model);
      const auto se = hdgm::gls_standard_errors(ds, cfg.spec, h.em().params);
      write_coefficient_csv(coefficient_report(h.em().params, h.em().labels, se), art.add("coefficients.csv"));
      auto out = open_out(art.add("loglik_trace.csv"));
      out << "iteration,loglik\n";
      for (std::size_t k = 0; k < h.em().loglik_trace.size(); ++k) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.10g\n", k, h.em().loglik_trace[k]);
        out << buf;
      }
      if (!h.em().converged) std::cerr << "warning: EM reached --max-iter before converging\n";
      break;
    }
    case ModelKind::Gamm:
      write_coefficient_csv(coefficient_report(dynamic_cast<const GammModel&>(*model).fit()), art.add("coefficients.csv"));
      break;
    case ModelKind::Rfstk: {
      const auto& r = dynamic_cast<const RfstkModel&>(*model).fit();
      const auto rows = rfstk::training_rows(ds, cfg.spec);
      write_importance_csv(permutation_importance(r.forest, rows.x, rows.y, o.repeats, o.seed, o.threads),
                           art.add("importance.csv"));
      write_variogram_csv(r.residual_variogram, art.add("residual_variogram.csv"));
      if (o.svg) write_variogram_svg(r.residual_variogram, art.add("residual_variogram.svg"), "Forest residual variogram");
      break;
    }
    case ModelKind::BaselineMean:
      break;
  }
  json config = {{"input", file_identity(o.input)}, {"fit", model_config_json(o, cfg)}};
  if (kind == ModelKind::Rfstk) config["repeats"] = o.repeats;
  art.write_manifest("fit", config, kind == ModelKind::Rfstk);
}

void cmd_predict(const RunOptions& o) {
  require_file(o.input, "--input");
  Artifacts art(o);
  const LoadedModel m = load_model(o);
  const Dataset ds = load(o, o.input, m.model->spec().covariates());
  auto out = open_out(art.add("predictions.csv"));
  out << "station_id,date,observed,predicted,variance,fallback\n";
  for (std::size_t i = 0; i < ds.num_stations(); ++i) {
    auto targets = make_targets(ds, m.model->spec(), i, m.model->start_date(), true);
    std::vector<PredictionTarget> keep;
    std::vector<std::size_t> days;
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (targets[t].x.allFinite()) {
        keep.push_back(std::move(targets[t]));
        days.push_back(t);
      }
    const auto pred = m.model->predict(keep);
    for (std::size_t k = 0; k < days.size(); ++k)
      out << ds.station(i).id << ',' << format_date(ds.date(days[k])) << ','
          << g6(ds.response()(Eigen::Index(i), Eigen::Index(days[k]))) << ',' << g6(pred[k].mean) << ','
          << g6(pred[k].variance) << ',' << (pred[k].fallback ? 1 : 0) << '\n';
  }
  out.close();
  art.write_manifest("predict", {{"input", file_identity(o.input)}, {"model", m.identity}}, false);
}

void cmd_cv(const RunOptions& o) {
  require_file(o.input, "--input");
  const ModelKind kind = parse_kind(o.model);
  // Folds run in parallel; each fold's forest stays single-threaded.
  const ModelConfig cfg = model_config(o, kind, 1);
  if (o.ma_window < 1) throw ConfigError("--ma-window must be >= 1");
  Artifacts art(o);
  const Dataset ds = load(o, o.input, cfg.spec.covariates());
  if (ds.num_stations() < 3) throw ConfigError("cross-validation needs at least 3 stations");

  CvOptions cv;
  cv.validate_ids = o.validate_only;
  if (o.exclude) {
    cv.exclude_ids = *o.exclude;
  } else {
    for (const auto& id : kDefaultExclusions)
      if (ds.station_index(id)) cv.exclude_ids.push_back(id);
  }
  cv.use_lagged_response = o.lagged_response;
  cv.threads = o.threads;
  const CVReport report = losocv(ds, cfg, cv);

  write_cv_predictions(report, art.add("cv_predictions.csv"));
  write_cv_summary(report, art.add("cv_summary.csv"));
  {
    auto out = open_out(art.add("cv_pooled.json"));
    out << cv_pooled_json(report).dump(2) << '\n';
  }
  write_moving_average_errors(report, art.add("cv_moving_average.csv"), o.ma_window);
  if (o.svg) {
    Plot plot{std::to_string(o.ma_window) + "-day moving average of prediction errors", "day", "error", {}, false};
    for (const auto& f : report.folds) {
      if (f.dates.empty()) continue;
      std::vector<double> err((f.dates.back() - f.dates.front()).count() + 1, kNaN);
      for (std::size_t k = 0; k < f.dates.size(); ++k)
        err[static_cast<std::size_t>((f.dates[k] - f.dates.front()).count())] = f.observed[k] - f.predicted[k];
      Series s{f.station_id, {}, moving_average(err, o.ma_window)};
      const double first = static_cast<double>((f.dates.front() - ds.start_date()).count());
      for (std::size_t k = 0; k < err.size(); ++k) s.x.push_back(first + static_cast<double>(k));
      plot.series.push_back(std::move(s));
    }
    write_svg(plot, art.add("cv_moving_average.svg"));
  }
  for (const auto& f : report.folds)
    if (f.failed) std::cerr << "fold " << f.station_id << " failed: " << f.error << '\n';

  json config = {{"input", file_identity(o.input)},
                 {"fit", model_config_json(o, cfg)},
                 {"validate_only", cv.validate_ids},
                 {"exclude", cv.exclude_ids},
                 {"lagged_response", cv.use_lagged_response},
                 {"ma_window", o.ma_window}};
  art.write_manifest("cv", config, kind == ModelKind::Rfstk);
  if (!report.folds.empty() && report.num_failed() == report.folds.size())
    throw std::runtime_error("every cross-validation fold failed");
}

void cmd_variogram(const RunOptions& o) {
  require_file(o.input, "--input");
  const VariogramSettings vs = variogram_settings(o);
  Artifacts art(o);
  json config = {{"input", file_identity(o.input)},
                 {"space_bins", vs.num_space_bins},
                 {"max_distance", vs.max_distance},
                 {"max_lag", vs.max_time_lag}};
  Eigen::MatrixXd field;
  std::optional<Dataset> ds;
  if (!o.model_file.empty()) {
    // Variogram of the model's in-sample residuals.
    const LoadedModel m = load_model(o);
    ds = load(o, o.input, m.model->spec().covariates());
    field = model_residuals(*m.model, *ds);
    config["model"] = m.identity;
  } else {
    ds = load(o, o.input, {});
    field = ds->response();
  }
  const VariogramGrid vg =
      empirical_variogram(field, ds->stations(), default_space_edges(ds->stations(), vs), vs.max_time_lag, o.threads);
  write_variogram_csv(vg, art.add("variogram.csv"));
  json fit = nullptr;
  try {
    fit = separable_json(fit_separable(vg, default_separable_init(vg)));
  } catch (const Error& e) {
    std::cerr << "warning: separable fit skipped: " << e.what() << '\n';
  }
  {
    auto out = open_out(art.add("variogram_fit.json"));
    out << json{{"separable", fit}}.dump(2) << '\n';
  }
  if (o.svg) write_variogram_svg(vg, art.add("variogram.svg"), "Empirical space-time variogram");
  art.write_manifest("variogram", config, false);
}

void cmd_diagnose(const RunOptions& o) {
  require_file(o.input, "--input");
  const VariogramSettings vs = variogram_settings(o);
  Artifacts art(o);
  const LoadedModel m = load_model(o);
  const Dataset ds = load(o, o.input, m.model->spec().covariates());
  const Eigen::MatrixXd r = model_residuals(*m.model, ds);
  const ResidualDiagnostics d = residual_diagnostics(r, ds, vs.max_time_lag, vs, o.threads);
  {
    auto out = open_out(art.add("residuals.csv"));
    out << "station_id,date,residual\n";
    for (std::size_t i = 0; i < ds.num_stations(); ++i)
      for (std::size_t t = 0; t < ds.num_days(); ++t)
        if (std::isfinite(r(Eigen::Index(i), Eigen::Index(t))))
          out << ds.station(i).id << ',' << format_date(ds.date(t)) << ',' << g6(r(Eigen::Index(i), Eigen::Index(t)))
              << '\n';
  }
  {
    auto out = open_out(art.add("monthly_sd.csv"));
    out << "month,sd\n";
    for (std::size_t k = 0; k < 12; ++k) out << k + 1 << ',' << g6(d.monthly_sd[k]) << '\n';
  }
  {
    auto out = open_out(art.add("acf.csv"));
    out << "station_id,lag,acf\n";
    for (std::size_t i = 0; i < ds.num_stations(); ++i)
      for (Eigen::Index k = 0; k < d.acf.cols(); ++k)
        out << ds.station(i).id << ',' << k << ',' << g6(d.acf(Eigen::Index(i), k)) << '\n';
  }
  if (d.variogram) {
    write_variogram_csv(*d.variogram, art.add("residual_variogram.csv"));
    if (o.svg) write_variogram_svg(*d.variogram, art.add("residual_variogram.svg"), "Residual variogram");
  }
  art.write_manifest("diagnose",
                     {{"input", file_identity(o.input)},
                      {"model", m.identity},
                      {"space_bins", vs.num_space_bins},
                      {"max_distance", vs.max_distance},
                      {"max_lag", vs.max_time_lag}},
                     false);
}

void cmd_pdp(const RunOptions& o) {
  require_file(o.input, "--input");
  if (o.grid < 2) throw ConfigError("--grid must be >= 2");
  Artifacts art(o);
  const LoadedModel m = load_model(o);
  const Dataset ds = load(o, o.input, m.model->spec().covariates());
  std::vector<std::string> vars = o.variables;
  if (vars.empty()) vars = m.model->spec().covariates();
  PdpOptions opt;
  opt.grid_size = o.grid;
  opt.seed = o.seed;
  for (const auto& v : vars) {
    const PdpCurve c = pdp(*m.model, ds, v, opt);
    write_pdp_csv(c, art.add("pdp_" + safe_name(v) + ".csv"));
    if (o.svg)
      write_svg(Plot{"Partial dependence on " + v, v, "mean prediction", {{v, c.grid, c.mean_prediction}}, false},
                art.add("pdp_" + safe_name(v) + ".svg"));
  }
  art.write_manifest("pdp",
                     {{"input", file_identity(o.input)}, {"model", m.identity}, {"variables", vars}, {"grid", o.grid},
                      {"seed", o.seed}},
                     true);
}

void cmd_importance(const RunOptions& o) {
  require_file(o.input, "--input");
  if (o.repeats < 1) throw ConfigError("--repeats must be >= 1");
  Artifacts art(o);
  const LoadedModel m = load_model(o);
  const auto* r = dynamic_cast<const RfstkModel*>(m.model.get());
  if (r == nullptr) throw ConfigError("importance needs an rfstk model");
  const Dataset ds = load(o, o.input, r->spec().covariates());
  const auto rows = rfstk::training_rows(ds, r->spec());
  if (static_cast<std::size_t>(rows.x.rows()) != r->fit().forest.num_rows)
    throw ConfigError("--input is not the data the forest was trained on");
  write_importance_csv(permutation_importance(r->fit().forest, rows.x, rows.y, o.repeats, o.seed, o.threads),
                       art.add("importance.csv"));
  art.write_manifest("importance",
                     {{"input", file_identity(o.input)}, {"model", m.identity}, {"repeats", o.repeats}, {"seed", o.seed}},
                     true);
}

void cmd_simulate(const RunOptions& o) {
  if (o.stations < 1 || o.days < 1) throw ConfigError("--stations and --days must be >= 1");
  if (!(std::abs(o.g) < 1.0) || !(o.theta > 0.0) || !(o.v >= 0.0) || !(o.sigma2 >= 0.0))
    throw ConfigError("need |g| < 1, theta > 0, v >= 0 and sigma2 >= 0");
  if (!(o.missing_rate >= 0.0 && o.missing_rate < 1.0)) throw ConfigError("--missing-rate must be in [0, 1)");
  if (o.missing_pattern != "random" && o.missing_pattern != "block")
    throw ConfigError("--missing-pattern must be random or block");
  if (o.scheme != "seasonal" && o.scheme != "iid") throw ConfigError("--scheme must be seasonal or iid");
  sim::SimConfig cfg;
  cfg.num_stations = o.stations;
  cfg.days = o.days;
  try {
    cfg.start = parse_date(o.start);
  } catch (const Error&) {
    throw ConfigError("--start must be an ISO date");
  }
  cfg.covariates = o.sim_covariates ? *o.sim_covariates : default_covariate_names();
  cfg.scheme = o.scheme == "iid" ? sim::CovariateScheme::IidNormal : sim::CovariateScheme::SeasonalSine;
  cfg.params.g = o.g;
  cfg.params.theta = o.theta;
  cfg.params.v = o.v;
  cfg.params.sigma2_eps = o.sigma2;
  const auto p = static_cast<Eigen::Index>(cfg.covariates.size()) + 1;
  if (o.beta.empty()) {
    // Positive concentrations well away from zero; covariates inert.
    cfg.params.beta = Eigen::VectorXd::Zero(p);
    cfg.params.beta(0) = 30.0;
  } else {
    if (static_cast<Eigen::Index>(o.beta.size()) != p)
      throw ConfigError("--beta needs " + std::to_string(p) + " values (intercept then one per covariate)");
    cfg.params.beta = Eigen::Map<const Eigen::VectorXd>(o.beta.data(), p);
  }
  cfg.seed = o.seed;
  Artifacts art(o);
  sim::SimResult s = sim::simulate_hdgm(cfg);
  Dataset data = s.data;
  if (o.missing_rate > 0.0)
    data = sim::inject_missingness(s.data, o.missing_rate,
                                   o.missing_pattern == "block" ? sim::MissingPattern::Block : sim::MissingPattern::Random,
                                   o.seed, o.block_length);
  CsvSchema schema;
  schema.covariates = cfg.covariates;
  write_csv(data, art.add("data.csv"), schema);
  {
    auto out = open_out(art.add("latent.csv"));
    out << "station_id,date,latent\n";
    for (std::size_t i = 0; i < data.num_stations(); ++i)
      for (std::size_t t = 0; t < data.num_days(); ++t) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", s.latent(Eigen::Index(i), Eigen::Index(t)));
        out << data.station(i).id << ',' << format_date(data.date(t)) << ',' << buf << '\n';
      }
  }
  {
    json truth = {{"params", hdgm::to_json(cfg.params)}, {"spec", to_json(s.spec)}, {"covariates", cfg.covariates}};
    auto out = open_out(art.add("truth.json"));
    out << truth.dump(2) << '\n';
  }
  json config = {{"stations", o.stations},         {"days", o.days},     {"start", o.start},
                 {"g", o.g},                       {"theta", o.theta},   {"v", o.v},
                 {"sigma2", o.sigma2},             {"beta", hdgm::to_json(cfg.params)["beta"]},
                 {"covariates", cfg.covariates},   {"scheme", o.scheme}, {"missing_rate", o.missing_rate},
                 {"missing_pattern", o.missing_pattern}, {"block_length", o.block_length}, {"seed", o.seed}};
  art.write_manifest("simulate", config, true);
}

}  // namespace pmst::cli
