#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "pmst/data.hpp"
#include "pmst/gamm.hpp"
#include "pmst/hdgm.hpp"
#include "pmst/rfstk.hpp"

namespace pmst {

enum class ModelKind { Hdgm, Gamm, Rfstk, BaselineMean };

std::string to_string(ModelKind kind);
/// "hdgm", "gamm", "rfstk", "baseline-mean". Throws InvalidArgument.
ModelKind model_kind_from_string(std::string_view name);

struct ModelConfig {
  ModelKind kind = ModelKind::Hdgm;
  ModelSpec spec = reference_linear_spec();
  hdgm::EmOptions em;
  std::optional<hdgm::HdgmParams> hdgm_init;
  gamm::GammOptions gamm;
  rfstk::RfstkOptions rfstk;
};

/// A fitted model of any kind. Targets count days from `start_date()`.
class FittedModel {
 public:
  virtual ~FittedModel() = default;

  [[nodiscard]] virtual ModelKind kind() const = 0;
  [[nodiscard]] virtual const ModelSpec& spec() const = 0;
  [[nodiscard]] virtual Date start_date() const = 0;
  [[nodiscard]] virtual std::size_t num_days() const = 0;
  /// Full-model predictions (large scale plus the small-scale component).
  [[nodiscard]] virtual std::vector<Prediction> predict(std::span<const PredictionTarget> targets) const = 0;
  /// Large-scale component for one design row.
  [[nodiscard]] virtual double large_scale(const Eigen::VectorXd& x) const = 0;
  /// Parameter count of the large scale (effective for GAMM); nullopt for the forest.
  [[nodiscard]] virtual std::optional<double> large_scale_dof() const = 0;
  /// Self-describing document; see model_from_json.
  [[nodiscard]] virtual nlohmann::json to_json() const = 0;
};

/// Throws whatever the chosen estimator throws.
std::unique_ptr<FittedModel> fit_model(const Dataset& train, const ModelConfig& config);

/// Rebuilds a model written by FittedModel::to_json. HDGM prediction needs the
/// training data: pass it as `train` (stations and dates are checked against
/// the document). Throws InvalidArgument, ParseError.
std::unique_ptr<FittedModel> model_from_json(const nlohmann::json& j, const Dataset* train = nullptr);

/// Concrete models, exposed for model-specific reporting.
class HdgmModel final : public FittedModel {
 public:
  HdgmModel(hdgm::EmResult em, const Dataset& train, ModelSpec spec);

  [[nodiscard]] ModelKind kind() const override { return ModelKind::Hdgm; }
  [[nodiscard]] const ModelSpec& spec() const override { return predictor_.spec(); }
  [[nodiscard]] Date start_date() const override { return predictor_.train().start_date(); }
  [[nodiscard]] std::size_t num_days() const override { return predictor_.train().num_days(); }
  [[nodiscard]] std::vector<Prediction> predict(std::span<const PredictionTarget> targets) const override;
  [[nodiscard]] double large_scale(const Eigen::VectorXd& x) const override;
  [[nodiscard]] std::optional<double> large_scale_dof() const override;
  [[nodiscard]] nlohmann::json to_json() const override;

  [[nodiscard]] const hdgm::EmResult& em() const { return em_; }
  [[nodiscard]] const hdgm::Predictor& predictor() const { return predictor_; }

 private:
  hdgm::EmResult em_;
  hdgm::Predictor predictor_;
};

class GammModel final : public FittedModel {
 public:
  GammModel(gamm::GammFit fit, Date start, std::size_t num_days);

  [[nodiscard]] ModelKind kind() const override { return ModelKind::Gamm; }
  [[nodiscard]] const ModelSpec& spec() const override { return fit_.spec; }
  [[nodiscard]] Date start_date() const override { return start_; }
  [[nodiscard]] std::size_t num_days() const override { return num_days_; }
  [[nodiscard]] std::vector<Prediction> predict(std::span<const PredictionTarget> targets) const override;
  [[nodiscard]] double large_scale(const Eigen::VectorXd& x) const override;
  [[nodiscard]] std::optional<double> large_scale_dof() const override;
  [[nodiscard]] nlohmann::json to_json() const override;

  [[nodiscard]] const gamm::GammFit& fit() const { return fit_; }

 private:
  gamm::GammFit fit_;
  Date start_;
  std::size_t num_days_;
};

class RfstkModel final : public FittedModel {
 public:
  RfstkModel(rfstk::RfstkFit fit, Date start);

  [[nodiscard]] ModelKind kind() const override { return ModelKind::Rfstk; }
  [[nodiscard]] const ModelSpec& spec() const override { return fit_.spec; }
  [[nodiscard]] Date start_date() const override { return start_; }
  [[nodiscard]] std::size_t num_days() const override {
    return static_cast<std::size_t>(fit_.train_residuals.cols());
  }
  [[nodiscard]] std::vector<Prediction> predict(std::span<const PredictionTarget> targets) const override;
  [[nodiscard]] double large_scale(const Eigen::VectorXd& x) const override;
  [[nodiscard]] std::optional<double> large_scale_dof() const override { return std::nullopt; }
  [[nodiscard]] nlohmann::json to_json() const override;

  [[nodiscard]] const rfstk::RfstkFit& fit() const { return fit_; }

 private:
  rfstk::RfstkFit fit_;
  Date start_;
};

/// Predicts the mean of the training responses observed on the target day
/// (the overall training mean on days with none, flagged as fallback).
class BaselineMeanModel final : public FittedModel {
 public:
  BaselineMeanModel(const Dataset& train, ModelSpec spec);
  BaselineMeanModel(Eigen::VectorXd daily_mean, double overall_mean, Date start, ModelSpec spec);

  [[nodiscard]] ModelKind kind() const override { return ModelKind::BaselineMean; }
  [[nodiscard]] const ModelSpec& spec() const override { return spec_; }
  [[nodiscard]] Date start_date() const override { return start_; }
  [[nodiscard]] std::size_t num_days() const override { return static_cast<std::size_t>(daily_mean_.size()); }
  [[nodiscard]] std::vector<Prediction> predict(std::span<const PredictionTarget> targets) const override;
  [[nodiscard]] double large_scale(const Eigen::VectorXd&) const override { return overall_mean_; }
  [[nodiscard]] std::optional<double> large_scale_dof() const override { return 1.0; }
  [[nodiscard]] nlohmann::json to_json() const override;

 private:
  Eigen::VectorXd daily_mean_;  // NaN on days without observations
  double overall_mean_;
  Date start_;
  ModelSpec spec_;
};

}  // namespace pmst
