#include "pmst/model.hpp"

#include <cmath>

#include "pmst/error.hpp"

namespace pmst {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Hdgm: return "hdgm";
    case ModelKind::Gamm: return "gamm";
    case ModelKind::Rfstk: return "rfstk";
    case ModelKind::BaselineMean: return "baseline-mean";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (ModelKind k : {ModelKind::Hdgm, ModelKind::Gamm, ModelKind::Rfstk, ModelKind::BaselineMean})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(name) + "'");
}

namespace {

nlohmann::json header(const FittedModel& m) {
  return {{"model", to_string(m.kind())},
          {"spec", to_json(m.spec())},
          {"start_date", format_date(m.start_date())},
          {"num_days", m.num_days()}};
}

}  // namespace

// ---------------------------------------------------------------------------

HdgmModel::HdgmModel(hdgm::EmResult em, const Dataset& train, ModelSpec spec)
    : em_(std::move(em)), predictor_(em_.params, train, std::move(spec)) {}

std::vector<Prediction> HdgmModel::predict(std::span<const PredictionTarget> targets) const {
  return predictor_.predict(targets);
}

double HdgmModel::large_scale(const Eigen::VectorXd& x) const { return predictor_.large_scale(x); }

std::optional<double> HdgmModel::large_scale_dof() const {
  return static_cast<double>(em_.params.beta.size() - static_cast<Eigen::Index>(em_.dropped_columns.size()));
}

nlohmann::json HdgmModel::to_json() const {
  nlohmann::json j = header(*this);
  j["stations"] = stations_to_json(predictor_.train().stations());
  j["params"] = hdgm::to_json(em_.params);
  j["labels"] = em_.labels;
  j["loglik"] = predictor_.loglik();
  j["loglik_trace"] = em_.loglik_trace;
  j["iterations"] = em_.iterations;
  j["converged"] = em_.converged;
  j["dropped_columns"] = em_.dropped_columns;
  return j;
}

// ---------------------------------------------------------------------------

GammModel::GammModel(gamm::GammFit fit, Date start, std::size_t num_days)
    : fit_(std::move(fit)), start_(start), num_days_(num_days) {}

std::vector<Prediction> GammModel::predict(std::span<const PredictionTarget> targets) const {
  return gamm::predict_gamm(fit_, targets);
}

double GammModel::large_scale(const Eigen::VectorXd& x) const { return fit_.large_scale(x); }

std::optional<double> GammModel::large_scale_dof() const {
  double dof = static_cast<double>(fit_.beta_linear.size() - static_cast<Eigen::Index>(fit_.dropped_columns.size()));
  for (const auto& s : fit_.smooths) dof += s.edf;
  return dof;
}

nlohmann::json GammModel::to_json() const {
  nlohmann::json j = header(*this);
  j["fit"] = gamm::to_json(fit_);
  return j;
}

// ---------------------------------------------------------------------------

RfstkModel::RfstkModel(rfstk::RfstkFit fit, Date start) : fit_(std::move(fit)), start_(start) {}

std::vector<Prediction> RfstkModel::predict(std::span<const PredictionTarget> targets) const {
  return rfstk::predict_rfstk(fit_, targets);
}

double RfstkModel::large_scale(const Eigen::VectorXd& x) const { return fit_.large_scale(x); }

nlohmann::json RfstkModel::to_json() const {
  nlohmann::json j = header(*this);
  j["fit"] = rfstk::to_json(fit_);
  return j;
}

// ---------------------------------------------------------------------------

BaselineMeanModel::BaselineMeanModel(const Dataset& train, ModelSpec spec)
    : start_(train.start_date()), spec_(std::move(spec)) {
  const auto T = static_cast<Eigen::Index>(train.num_days());
  daily_mean_ = Eigen::VectorXd::Constant(T, kNaN);
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < train.num_stations(); ++i)
      if (train.observed(i, static_cast<std::size_t>(t))) {
        s += train.response()(static_cast<Eigen::Index>(i), t);
        ++c;
      }
    if (c > 0) daily_mean_(t) = s / static_cast<double>(c);
    total += s;
    count += c;
  }
  if (count == 0) throw Error(ErrorCode::AllMissing, "no observed training responses");
  overall_mean_ = total / static_cast<double>(count);
}

BaselineMeanModel::BaselineMeanModel(Eigen::VectorXd daily_mean, double overall_mean, Date start, ModelSpec spec)
    : daily_mean_(std::move(daily_mean)), overall_mean_(overall_mean), start_(start), spec_(std::move(spec)) {}

std::vector<Prediction> BaselineMeanModel::predict(std::span<const PredictionTarget> targets) const {
  std::vector<Prediction> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    Prediction p;
    if (t.day >= 0 && t.day < daily_mean_.size() && std::isfinite(daily_mean_(t.day))) {
      p.mean = daily_mean_(t.day);
    } else {
      p.mean = overall_mean_;
      p.fallback = true;
    }
    out.push_back(p);
  }
  return out;
}

nlohmann::json BaselineMeanModel::to_json() const {
  nlohmann::json j = header(*this);
  auto daily = nlohmann::json::array();
  for (Eigen::Index t = 0; t < daily_mean_.size(); ++t)
    daily.push_back(std::isfinite(daily_mean_(t)) ? nlohmann::json(daily_mean_(t)) : nlohmann::json(nullptr));
  j["daily_mean"] = daily;
  j["overall_mean"] = overall_mean_;
  return j;
}

// ---------------------------------------------------------------------------

std::unique_ptr<FittedModel> fit_model(const Dataset& train, const ModelConfig& config) {
  switch (config.kind) {
    case ModelKind::Hdgm: {
      const hdgm::HdgmParams init = config.hdgm_init ? *config.hdgm_init : hdgm::default_init(train, config.spec);
      hdgm::EmResult em = hdgm::em_fit(train, config.spec, init, config.em);
      return std::make_unique<HdgmModel>(std::move(em), train, config.spec);
    }
    case ModelKind::Gamm:
      return std::make_unique<GammModel>(gamm::fit_gamm(train, config.spec, config.gamm), train.start_date(),
                                         train.num_days());
    case ModelKind::Rfstk:
      return std::make_unique<RfstkModel>(rfstk::fit_rfstk(train, config.spec, config.rfstk), train.start_date());
    case ModelKind::BaselineMean:
      return std::make_unique<BaselineMeanModel>(train, config.spec);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

std::unique_ptr<FittedModel> model_from_json(const nlohmann::json& j, const Dataset* train) {
  try {
    const ModelKind kind = model_kind_from_string(j.at("model").get<std::string>());
    const ModelSpec spec = spec_from_json(j.at("spec"));
    const Date start = parse_date(j.at("start_date").get<std::string>());
    const auto days = j.at("num_days").get<std::size_t>();
    switch (kind) {
      case ModelKind::Hdgm: {
        if (train == nullptr) throw Error(ErrorCode::InvalidArgument, "HDGM prediction needs the training data");
        const auto stations = stations_from_json(j.at("stations"));
        bool same = stations.size() == train->num_stations() && train->start_date() == start && train->num_days() == days;
        for (std::size_t i = 0; same && i < stations.size(); ++i) same = stations[i].id == train->station(i).id;
        if (!same) throw Error(ErrorCode::InvalidArgument, "training data do not match the fitted HDGM");
        hdgm::EmResult em;
        em.params = hdgm::params_from_json(j.at("params"));
        em.labels = j.value("labels", std::vector<std::string>{});
        em.loglik_trace = j.value("loglik_trace", std::vector<double>{});
        em.iterations = j.value("iterations", 0);
        em.converged = j.value("converged", true);
        em.dropped_columns = j.value("dropped_columns", std::vector<std::string>{});
        return std::make_unique<HdgmModel>(std::move(em), *train, spec);
      }
      case ModelKind::Gamm:
        return std::make_unique<GammModel>(gamm::fit_from_json(j.at("fit")), start, days);
      case ModelKind::Rfstk:
        return std::make_unique<RfstkModel>(rfstk::fit_from_json(j.at("fit")), start);
      case ModelKind::BaselineMean: {
        const auto& d = j.at("daily_mean");
        Eigen::VectorXd daily(static_cast<Eigen::Index>(d.size()));
        for (std::size_t t = 0; t < d.size(); ++t)
          daily(static_cast<Eigen::Index>(t)) = d[t].is_null() ? kNaN : d[t].get<double>();
        return std::make_unique<BaselineMeanModel>(std::move(daily), j.at("overall_mean").get<double>(), start, spec);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model document: ") + e.what());
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

}  // namespace pmst
