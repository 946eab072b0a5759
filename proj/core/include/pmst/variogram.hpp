#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pmst/data.hpp"
#include "pmst/kernels.hpp"

namespace pmst {

/// Binned space-time semivariances. Cell (b, tau) pools pairs whose
/// great-circle distance falls in [edges[b], edges[b+1]) at time offset tau.
struct VariogramGrid {
  std::vector<double> space_bin_edges;  // degrees, strictly increasing from 0
  int max_time_lag = 0;                 // days
  Eigen::MatrixXd gamma;                // bins x (max_time_lag + 1); NaN where empty
  Eigen::MatrixXd counts;               // pair counts

  [[nodiscard]] Eigen::Index num_space_bins() const { return gamma.rows(); }
  [[nodiscard]] double bin_center(Eigen::Index b) const {
    return 0.5 * (space_bin_edges[static_cast<std::size_t>(b)] + space_bin_edges[static_cast<std::size_t>(b) + 1]);
  }
};

struct VariogramSettings {
  int num_space_bins = 12;
  double max_distance = 0.0;  // degrees; <= 0 selects half the largest pairwise distance
  int max_time_lag = 14;      // days
};

/// `num_bins` equal-width edges from 0 to `max_distance`.
std::vector<double> equal_width_edges(double max_distance, int num_bins);
/// Default edges: 12 equal bins up to half the largest pairwise station distance.
std::vector<double> default_space_edges(std::span<const Station> stations, const VariogramSettings& settings = {});

/// gamma(b, tau) = sum (z(s,t) - z(s',t+tau))^2 / (2 N) over pairs counted once
/// (unordered station pairs at tau = 0, ordered pairs with the later value at
/// t + tau otherwise). NaN cells are skipped. Throws EmptyField when fewer
/// than two values are present. `threads` partitions the work by lag.
VariogramGrid empirical_variogram(const Eigen::MatrixXd& field, std::span<const Station> stations,
                                  std::span<const double> space_bin_edges, int max_time_lag, unsigned threads = 1);

/// nugget + sill * (1 - exp(-h/theta_s) exp(-u/theta_t)).
double separable_variogram(double h, double u, const SeparableCorrParams& p);

struct SeparableFit {
  SeparableCorrParams params;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // best value per optimiser iteration
};

/// Weighted least squares (Cressie weights counts / gamma_model^2) over
/// populated cells, excluding the first space bin at lag 0, minimised by
/// Nelder-Mead on log parameters. Throws DegenerateGrid with fewer than 4
/// usable cells or fewer than 2 bins / lags, NoConvergence when restarts are
/// exhausted.
SeparableFit fit_separable(const VariogramGrid& vg, const SeparableCorrParams& init);
/// Data-driven starting point: nugget 10% and sill 90% of the largest
/// semivariance, theta_s a third of the largest bin centre, theta_t 2 days.
SeparableCorrParams default_separable_init(const VariogramGrid& vg);

/// CSV with columns space_bin_center,time_lag,gamma,count (6 significant digits).
void write_variogram_csv(const VariogramGrid& vg, const std::filesystem::path& path);

}  // namespace pmst
