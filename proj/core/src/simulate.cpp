#include "pmst/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "pmst/error.hpp"
#include "pmst/kernels.hpp"
#include "pmst/rng.hpp"

namespace pmst::sim {

using Index = Eigen::Index;

namespace {

std::vector<Station> place_stations(const SimConfig& cfg, CounterRng& rng) {
  std::vector<Station> out;
  const int width = cfg.num_stations >= 100 ? 3 : 2;
  for (std::size_t i = 0; i < cfg.num_stations; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "S%0*zu", width, i + 1);
    Station s;
    s.id = id;
    s.latitude = cfg.lat_min + (cfg.lat_max - cfg.lat_min) * rng.uniform();
    s.longitude = cfg.lon_min + (cfg.lon_max - cfg.lon_min) * rng.uniform();
    s.altitude = 50.0 + 550.0 * rng.uniform();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

SimResult simulate_hdgm(const SimConfig& cfg) {
  const hdgm::HdgmParams& p = cfg.params;
  if (!(std::abs(p.g) < 1.0) || !(p.theta > 0.0) || !(p.v >= 0.0) || !(p.sigma2_eps >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "simulation parameters out of range");

  std::vector<Station> stations;
  Date start = cfg.start;
  std::size_t T = cfg.days;
  if (cfg.scheme == CovariateScheme::FromDataset) {
    if (cfg.source == nullptr) throw Error(ErrorCode::InvalidArgument, "FromDataset needs a source dataset");
    stations.assign(cfg.source->stations().begin(), cfg.source->stations().end());
    start = cfg.source->start_date();
    T = cfg.source->num_days();
  } else if (!cfg.stations.empty()) {
    stations = cfg.stations;
  } else {
    CounterRng rng(cfg.seed, 1);
    stations = place_stations(cfg, rng);
  }
  if (T < 1 || stations.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one station and one day");
  const auto n = static_cast<Index>(stations.size());
  const auto nt = static_cast<Index>(T);

  std::vector<Dataset::Covariate> covs;
  {
    CounterRng rng(cfg.seed, 2);
    const auto k = cfg.covariates.size();
    for (std::size_t j = 0; j < k; ++j) {
      const std::string& name = cfg.covariates[j];
      Eigen::MatrixXd values(n, nt);
      if (cfg.scheme == CovariateScheme::FromDataset) {
        values = cfg.source->covariate(name);
      } else if (name == "Altitude") {
        for (Index i = 0; i < n; ++i) values.row(i).setConstant(stations[static_cast<std::size_t>(i)].altitude);
      } else {
        const double phase = static_cast<double>(j) / static_cast<double>(k);
        for (Index i = 0; i < n; ++i)
          for (Index t = 0; t < nt; ++t) {
            const double e = rng.normal();
            values(i, t) = cfg.scheme == CovariateScheme::IidNormal
                               ? e
                               : std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) / 365.25 + phase)) + 0.5 * e;
          }
      }
      covs.push_back({name, std::move(values)});
    }
  }

  SimResult out;
  out.spec.linear_terms = cfg.covariates;
  out.spec.include_month_dummies = cfg.include_month_dummies;
  // Response filled below; the design only needs the covariates.
  Dataset shell(stations, start, Eigen::MatrixXd::Zero(n, nt), covs);
  const DesignMatrix dm = design_matrix(shell, out.spec);
  Eigen::VectorXd beta = p.beta;
  if (beta.size() == 0) beta = Eigen::VectorXd::Zero(static_cast<Index>(dm.labels.size()));
  if (beta.size() != static_cast<Index>(dm.labels.size()))
    throw Error(ErrorCode::InvalidArgument, "beta has " + std::to_string(beta.size()) + " entries, design has " +
                                                std::to_string(dm.labels.size()));

  const Eigen::LLT<Eigen::MatrixXd> llt = checked_llt(corr_matrix(stations, ExpCorrParams{p.theta}), "innovation covariance");
  const Eigen::MatrixXd L = llt.matrixL();
  out.latent.resize(n, nt);
  {
    CounterRng rng(cfg.seed, 3);
    auto draw = [&] {
      Eigen::VectorXd e(n);
      for (Index i = 0; i < n; ++i) e(i) = rng.normal();
      return Eigen::VectorXd(L * e);
    };
    Eigen::VectorXd xi = draw() / std::sqrt(1.0 - p.g * p.g);
    for (Index t = 0; t < nt; ++t) {
      xi = p.g * xi + draw();
      out.latent.col(t) = xi;
    }
  }
  Eigen::MatrixXd z(n, nt);
  {
    CounterRng rng(cfg.seed, 4);
    const double sd = std::sqrt(p.sigma2_eps);
    for (Index i = 0; i < n; ++i)
      for (Index t = 0; t < nt; ++t) {
        const double eps = rng.normal();
        const auto r = static_cast<Index>(dm.row(static_cast<std::size_t>(i), static_cast<std::size_t>(t)));
        z(i, t) = dm.x.row(r).dot(beta) + p.v * out.latent(i, t) + sd * eps;
      }
  }
  out.data = Dataset(std::move(stations), start, std::move(z), std::move(covs));
  return out;
}

Dataset inject_missingness(const Dataset& ds, double rate, MissingPattern pattern, std::uint64_t seed,
                           int block_length) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::InvalidArgument, "rate must be in [0, 1)");
  Eigen::MatrixXd z = ds.response();
  const Index n = z.rows(), T = z.cols();
  CounterRng rng(seed, 0);
  if (pattern == MissingPattern::Random) {
    std::vector<Index> cells;
    for (Index i = 0; i < n; ++i)
      for (Index t = 0; t < T; ++t)
        if (ds.observed(static_cast<std::size_t>(i), static_cast<std::size_t>(t))) cells.push_back(i * T + t);
    const auto want = std::min(cells.size(), static_cast<std::size_t>(std::llround(rate * static_cast<double>(n * T))));
    for (std::size_t k = 0; k < want; ++k) {
      std::swap(cells[k], cells[k + static_cast<std::size_t>(rng.below(cells.size() - k))]);
      z(cells[k] / T, cells[k] % T) = kNaN;
    }
    return ds.with_response(std::move(z));
  }
  if (block_length < 1) throw Error(ErrorCode::InvalidArgument, "block_length must be >= 1");
  // Slots of block_length masked days plus one kept day keep runs separate.
  const Index slot = block_length + 1;
  const auto slots = static_cast<std::size_t>(T / slot);
  const auto want = std::min(slots, static_cast<std::size_t>(std::llround(rate * static_cast<double>(T) / block_length)));
  for (Index i = 0; i < n; ++i) {
    std::vector<std::size_t> order(slots);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < want; ++k) {
      std::swap(order[k], order[k + static_cast<std::size_t>(rng.below(slots - k))]);
      const Index begin = static_cast<Index>(order[k]) * slot;
      z.row(i).segment(begin, block_length).setConstant(kNaN);
    }
  }
  return ds.with_response(std::move(z));
}

}  // namespace pmst::sim
