#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmst/data.hpp"
#include "pmst/hdgm.hpp"

namespace pmst::sim {

enum class CovariateScheme { IidNormal, SeasonalSine, FromDataset };

struct SimConfig {
  /// Explicit stations; when empty, `num_stations` are placed uniformly in the box.
  std::vector<Station> stations;
  std::size_t num_stations = 20;
  double lat_min = 45.0, lat_max = 47.0;
  double lon_min = 8.5, lon_max = 10.5;
  std::size_t days = 365;
  Date start = std::chrono::sys_days{std::chrono::year{2016} / 1 / 1};
  /// Large-scale design: intercept, months (optional), then these covariates.
  std::vector<std::string> covariates;
  bool include_month_dummies = false;
  /// beta must match the design; sigma2_eps = 0 and v = 0 are allowed here.
  hdgm::HdgmParams params;
  CovariateScheme scheme = CovariateScheme::IidNormal;
  /// Covariate source for FromDataset (its stations and dates are reused).
  const Dataset* source = nullptr;
  std::uint64_t seed = 1;
};

struct SimResult {
  Dataset data;
  Eigen::MatrixXd latent;  // xi, stations x days
  ModelSpec spec;          // linear spec matching the simulated design
};

/// Draws xi_0 ~ N(0, Gamma / (1 - g^2)), xi_t = g xi_{t-1} + eta_t with
/// eta_t ~ N(0, Gamma(theta)), and z = X beta + v xi + eps. The covariate
/// "Altitude" is the station altitude. Throws InvalidArgument, NotPositiveDefinite.
SimResult simulate_hdgm(const SimConfig& cfg);

enum class MissingPattern { Random, Block };

/// Masks round(rate * stations * days) observed cells at random, or for
/// Block runs of `block_length` consecutive days per station covering
/// about `rate` of each series. Throws InvalidArgument unless 0 <= rate < 1.
Dataset inject_missingness(const Dataset& ds, double rate, MissingPattern pattern, std::uint64_t seed,
                           int block_length = 10);

}  // namespace pmst::sim
