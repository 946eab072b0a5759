#include "pmst/rfstk.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "pmst/error.hpp"

namespace pmst::rfstk {

using Index = Eigen::Index;

double RfstkFit::large_scale(const Eigen::VectorXd& x) const {
  if (x.size() != static_cast<Index>(forest.features.size()) + 1 || !x.allFinite())
    throw Error(ErrorCode::MissingTargetCovariate, "design row does not match the forest features");
  const Eigen::RowVectorXd row = x.tail(x.size() - 1).transpose();
  return forest.predict(row);
}

TrainingRows training_rows(const Dataset& ds, const ModelSpec& spec) {
  spec.validate(ds);
  const DesignMatrix dm = design_matrix(ds, spec);
  const Index p = static_cast<Index>(dm.labels.size()) - 1;
  if (p < 1) throw Error(ErrorCode::InvalidSpec, "the forest needs at least one predictor");
  TrainingRows out;
  for (Index r = 0; r < dm.x.rows(); ++r)
    if (dm.observed[static_cast<std::size_t>(r)] && dm.x.row(r).allFinite()) out.cells.push_back(r);
  if (out.cells.empty()) throw Error(ErrorCode::EmptyInput, "no observed rows with covariates");
  out.x.resize(static_cast<Index>(out.cells.size()), p);
  out.y.resize(static_cast<Index>(out.cells.size()));
  const auto T = static_cast<Index>(ds.num_days());
  for (std::size_t a = 0; a < out.cells.size(); ++a) {
    out.x.row(static_cast<Index>(a)) = dm.x.row(out.cells[a]).tail(p);
    out.y(static_cast<Index>(a)) = ds.response()(out.cells[a] / T, out.cells[a] % T);
  }
  out.features.assign(dm.labels.begin() + 1, dm.labels.end());
  return out;
}

RfstkFit fit_rfstk(const Dataset& ds, const ModelSpec& spec, const RfstkOptions& options) {
  const TrainingRows tr = training_rows(ds, spec);
  const auto T = static_cast<Index>(ds.num_days());
  const auto& rows = tr.cells;
  const auto& x = tr.x;
  const auto& y = tr.y;

  RfstkFit fit;
  fit.spec = spec;
  fit.kriging = options.kriging;
  fit.stations.assign(ds.stations().begin(), ds.stations().end());
  fit.forest = forest::fit_forest(x, y, options.forest, tr.features);
  fit.train_residuals = Eigen::MatrixXd::Constant(static_cast<Index>(ds.num_stations()), T, kNaN);
  for (std::size_t a = 0; a < rows.size(); ++a)
    fit.train_residuals(rows[a] / T, rows[a] % T) = y(static_cast<Index>(a)) - fit.forest.predict(x.row(static_cast<Index>(a)));

  const auto edges = default_space_edges(ds.stations(), options.variogram);
  fit.residual_variogram =
      empirical_variogram(fit.train_residuals, ds.stations(), edges, options.variogram.max_time_lag, options.forest.threads);
  fit.residual_cov = fit_separable(fit.residual_variogram, default_separable_init(fit.residual_variogram)).params;
  return fit;
}

namespace {

KrigingResult krige(const RfstkFit& fit, const Eigen::VectorXd& dist, std::ptrdiff_t day) {
  const SeparableCorrParams& p = fit.residual_cov;
  const Eigen::MatrixXd& r = fit.train_residuals;
  const auto T = static_cast<std::ptrdiff_t>(r.cols());
  const auto k = static_cast<std::size_t>(std::max(fit.kriging.max_neighbors, 1));

  // The k nearest cells overall are among the k nearest days of each station.
  using Cand = std::tuple<double, std::size_t, std::size_t>;
  std::vector<Cand> cand;
  for (Index i = 0; i < r.rows(); ++i) {
    const double hs = dist(i) / p.theta_s;
    std::size_t taken = 0;
    auto take = [&](std::ptrdiff_t t, std::ptrdiff_t step) {
      if (t < 0 || t >= T || taken >= k || !std::isfinite(r(i, t))) return;
      cand.emplace_back(hs + static_cast<double>(step) / p.theta_t, static_cast<std::size_t>(i),
                        static_cast<std::size_t>(t));
      ++taken;
    };
    take(day, 0);
    for (std::ptrdiff_t step = 1; taken < k && (day - step >= 0 || day + step < T); ++step) {
      take(day - step, step);
      take(day + step, step);
    }
  }
  KrigingResult out;
  if (cand.empty()) {
    out.fallback = true;
    return out;
  }
  const std::size_t m = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(m), cand.end());
  cand.resize(m);

  const double scale = p.sill + p.nugget;
  if (!(scale > 0.0)) {
    out.fallback = true;
    return out;
  }
  const auto n = static_cast<Index>(m);
  Eigen::MatrixXd sigma(n, n);
  Eigen::VectorXd c(n), z(n);
  for (Index a = 0; a < n; ++a) {
    const auto [da, ia, ta] = cand[static_cast<std::size_t>(a)];
    out.neighbors.emplace_back(ia, ta);
    z(a) = r(static_cast<Index>(ia), static_cast<Index>(ta));
    c(a) = separable_cov(dist(static_cast<Index>(ia)), std::abs(static_cast<double>(ta) - static_cast<double>(day)), p);
    for (Index b = 0; b <= a; ++b) {
      const auto [db, ib, tb] = cand[static_cast<std::size_t>(b)];
      const double h = great_circle_deg(fit.stations[ia], fit.stations[ib]);
      const double u = std::abs(static_cast<double>(ta) - static_cast<double>(tb));
      sigma(a, b) = sigma(b, a) = separable_cov(h, u, p, a == b);
    }
    sigma(a, a) += fit.kriging.jitter * scale;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(sigma, "residual kriging covariance");
  const Eigen::VectorXd a = llt.solve(c);
  const Eigen::VectorXd b = llt.solve(Eigen::VectorXd::Ones(n));
  const double mu = (a.sum() - 1.0) / b.sum();
  out.weights = a - mu * b;
  out.value = out.weights.dot(z);
  out.variance = std::max(scale - out.weights.dot(c) - mu, 0.0);
  return out;
}

Eigen::VectorXd station_distances(const RfstkFit& fit, const Station& s) {
  return cross_distance(std::span<const Station>(&s, 1), fit.stations).row(0).transpose();
}

}  // namespace

KrigingResult krige_residual(const RfstkFit& fit, const Station& station, std::ptrdiff_t day) {
  return krige(fit, station_distances(fit, station), day);
}

std::vector<Prediction> predict_rfstk(const RfstkFit& fit, std::span<const PredictionTarget> targets) {
  std::vector<Prediction> out;
  out.reserve(targets.size());
  const Station* cached = nullptr;
  Eigen::VectorXd dist;
  for (const auto& target : targets) {
    if (cached == nullptr || !(*cached == target.station)) {
      dist = station_distances(fit, target.station);
      cached = &target.station;
    }
    Prediction p;
    p.mean = fit.large_scale(target.x);
    const KrigingResult k = krige(fit, dist, target.day);
    p.mean += k.value;
    p.variance = k.variance;
    p.fallback = k.fallback;
    out.push_back(p);
  }
  return out;
}

nlohmann::json to_json(const RfstkFit& fit) {
  nlohmann::json j;
  j["spec"] = pmst::to_json(fit.spec);
  j["forest"] = forest::to_json(fit.forest);
  const auto& p = fit.residual_cov;
  j["residual_cov"] = {{"theta_s", p.theta_s}, {"theta_t", p.theta_t}, {"sill", p.sill}, {"nugget", p.nugget}};
  j["stations"] = stations_to_json(fit.stations);
  j["kriging"] = {{"max_neighbors", fit.kriging.max_neighbors}, {"jitter", fit.kriging.jitter}};
  auto res = nlohmann::json::array();
  for (Index i = 0; i < fit.train_residuals.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index t = 0; t < fit.train_residuals.cols(); ++t) {
      const double v = fit.train_residuals(i, t);
      row.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    }
    res.push_back(std::move(row));
  }
  j["train_residuals"] = std::move(res);
  return j;
}

RfstkFit fit_from_json(const nlohmann::json& j) {
  RfstkFit fit;
  fit.spec = spec_from_json(j.at("spec"));
  fit.forest = forest::forest_from_json(j.at("forest"));
  const auto& p = j.at("residual_cov");
  fit.residual_cov = {p.at("theta_s").get<double>(), p.at("theta_t").get<double>(), p.at("sill").get<double>(),
                      p.at("nugget").get<double>()};
  fit.stations = stations_from_json(j.at("stations"));
  fit.kriging.max_neighbors = j.at("kriging").value("max_neighbors", 100);
  fit.kriging.jitter = j.at("kriging").value("jitter", 1e-8);
  const auto& res = j.at("train_residuals");
  const auto n = static_cast<Index>(res.size());
  const auto T = n > 0 ? static_cast<Index>(res[0].size()) : 0;
  fit.train_residuals.resize(n, T);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < T; ++t) {
      const auto& v = res[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
      fit.train_residuals(i, t) = v.is_null() ? kNaN : v.get<double>();
    }
  return fit;
}

}  // namespace pmst::rfstk
