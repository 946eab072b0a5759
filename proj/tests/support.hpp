#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmst/data.hpp"
#include "pmst/rng.hpp"
#include "pmst/simulate.hpp"

namespace testing {

inline pmst::Date day0() { return pmst::parse_date("2016-01-01"); }

/// Stations scattered uniformly in a 2 x 2 degree box.
inline std::vector<pmst::Station> random_stations(std::size_t n, std::uint64_t seed) {
  pmst::CounterRng rng(seed, 99);
  std::vector<pmst::Station> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"S" + std::to_string(i + 1), 45.0 + 2.0 * rng.uniform(), 8.5 + 2.0 * rng.uniform(),
                   100.0 + 500.0 * rng.uniform()});
  return out;
}

/// Panel with the given response and i.i.d. normal covariates x1..xk.
inline pmst::Dataset panel(std::vector<pmst::Station> stations, Eigen::MatrixXd z, int k, std::uint64_t seed) {
  pmst::CounterRng rng(seed, 7);
  std::vector<pmst::Dataset::Covariate> covs;
  for (int j = 0; j < k; ++j) {
    Eigen::MatrixXd v(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    covs.push_back({"x" + std::to_string(j + 1), v});
  }
  return pmst::Dataset(std::move(stations), day0(), std::move(z), std::move(covs));
}

inline pmst::ModelSpec linear_spec(std::vector<std::string> terms) {
  pmst::ModelSpec s;
  s.linear_terms = std::move(terms);
  s.include_month_dummies = false;
  return s;
}

/// HDGM simulation with covariates x1..xk (i.i.d. normal).
inline pmst::sim::SimResult simulate(std::size_t n, std::size_t days, double g, double theta, double v, double s2,
                                     Eigen::VectorXd beta, std::uint64_t seed) {
  pmst::sim::SimConfig cfg;
  cfg.num_stations = n;
  cfg.days = days;
  for (Eigen::Index j = 1; j < beta.size(); ++j) cfg.covariates.push_back("x" + std::to_string(j));
  cfg.params.beta = std::move(beta);
  cfg.params.g = g;
  cfg.params.theta = theta;
  cfg.params.v = v;
  cfg.params.sigma2_eps = s2;
  cfg.seed = seed;
  return pmst::sim::simulate_hdgm(cfg);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pmst_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
