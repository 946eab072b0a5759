#include "pmst/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pmst/error.hpp"
#include "pmst/optim.hpp"
#include "pmst/parallel.hpp"

namespace pmst {

std::vector<double> equal_width_edges(double max_distance, int num_bins) {
  if (!(max_distance > 0.0) || num_bins < 1)
    throw Error(ErrorCode::InvalidArgument, "variogram bins need max_distance > 0 and at least one bin");
  std::vector<double> edges(static_cast<std::size_t>(num_bins) + 1);
  for (int b = 0; b <= num_bins; ++b) edges[static_cast<std::size_t>(b)] = max_distance * b / num_bins;
  return edges;
}

std::vector<double> default_space_edges(std::span<const Station> stations, const VariogramSettings& settings) {
  double max_d = settings.max_distance;
  if (!(max_d > 0.0)) max_d = 0.5 * distance_matrix(stations).maxCoeff();
  if (!(max_d > 0.0)) max_d = 1.0;
  return equal_width_edges(max_d, settings.num_space_bins);
}

namespace {

Eigen::Index find_bin(std::span<const double> edges, double d) {
  if (d < edges.front() || d >= edges.back()) return -1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), d);
  return static_cast<Eigen::Index>(it - edges.begin()) - 1;
}

}  // namespace

VariogramGrid empirical_variogram(const Eigen::MatrixXd& field, std::span<const Station> stations,
                                  std::span<const double> space_bin_edges, int max_time_lag, unsigned threads) {
  if (field.rows() != static_cast<Eigen::Index>(stations.size()))
    throw Error(ErrorCode::LengthMismatch, "field rows must match stations");
  if (space_bin_edges.size() < 2 || space_bin_edges.front() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "space bin edges must start at 0 and define at least one bin");
  for (std::size_t k = 1; k < space_bin_edges.size(); ++k)
    if (!(space_bin_edges[k] > space_bin_edges[k - 1]))
      throw Error(ErrorCode::InvalidArgument, "space bin edges must be strictly increasing");
  if (max_time_lag < 0) throw Error(ErrorCode::InvalidArgument, "max_time_lag must be >= 0");
  if ((field.array().isNaN() == false).count() < 2) throw Error(ErrorCode::EmptyField, "fewer than two values");

  const Eigen::Index n = field.rows();
  const Eigen::Index T = field.cols();
  const auto bins = static_cast<Eigen::Index>(space_bin_edges.size()) - 1;
  const Eigen::MatrixXd dist = distance_matrix(stations);
  Eigen::MatrixXi bin_of(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) bin_of(i, j) = static_cast<int>(find_bin(space_bin_edges, dist(i, j)));

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(bins, max_time_lag + 1);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(bins, max_time_lag + 1);
  parallel_for(static_cast<std::size_t>(max_time_lag) + 1, threads, [&](std::size_t lag_index) {
    const auto tau = static_cast<Eigen::Index>(lag_index);
    for (Eigen::Index t = 0; t + tau < T; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double a = field(i, t);
        if (std::isnan(a)) continue;
        // At lag 0 each unordered pair once; otherwise every ordered pair.
        for (Eigen::Index j = (tau == 0 ? i + 1 : 0); j < n; ++j) {
          const double b = field(j, t + tau);
          if (std::isnan(b)) continue;
          const int bin = bin_of(i, j);
          if (bin < 0) continue;
          const double diff = a - b;
          sums(bin, tau) += diff * diff;
          counts(bin, tau) += 1.0;
        }
      }
    }
  });

  VariogramGrid vg;
  vg.space_bin_edges.assign(space_bin_edges.begin(), space_bin_edges.end());
  vg.max_time_lag = max_time_lag;
  vg.counts = counts;
  vg.gamma = Eigen::MatrixXd::Constant(bins, max_time_lag + 1, kNaN);
  for (Eigen::Index b = 0; b < bins; ++b)
    for (Eigen::Index tau = 0; tau <= max_time_lag; ++tau)
      if (counts(b, tau) > 0) vg.gamma(b, tau) = sums(b, tau) / (2.0 * counts(b, tau));
  return vg;
}

double separable_variogram(double h, double u, const SeparableCorrParams& p) {
  return p.nugget + p.sill * (1.0 - std::exp(-h / p.theta_s) * std::exp(-u / p.theta_t));
}

SeparableCorrParams default_separable_init(const VariogramGrid& vg) {
  double gmax = 0.0;
  for (Eigen::Index b = 0; b < vg.gamma.rows(); ++b)
    for (Eigen::Index t = 0; t < vg.gamma.cols(); ++t)
      if (vg.counts(b, t) > 0) gmax = std::max(gmax, vg.gamma(b, t));
  if (!(gmax > 0.0)) gmax = 1.0;
  SeparableCorrParams p;
  p.nugget = 0.1 * gmax;
  p.sill = 0.9 * gmax;
  p.theta_s = std::max(vg.bin_center(vg.num_space_bins() - 1) / 3.0, 1e-3);
  p.theta_t = 2.0;
  return p;
}

SeparableFit fit_separable(const VariogramGrid& vg, const SeparableCorrParams& init) {
  struct Cell {
    double h, u, gamma, weight;
  };
  std::vector<Cell> cells;
  std::vector<bool> bin_used(static_cast<std::size_t>(vg.num_space_bins()), false);
  std::vector<bool> lag_used(static_cast<std::size_t>(vg.max_time_lag) + 1, false);
  double gmax = 0.0;
  for (Eigen::Index b = 0; b < vg.gamma.rows(); ++b)
    for (Eigen::Index t = 0; t < vg.gamma.cols(); ++t) {
      if (b == 0 && t == 0) continue;
      if (!(vg.counts(b, t) > 0) || std::isnan(vg.gamma(b, t))) continue;
      cells.push_back({vg.bin_center(b), static_cast<double>(t), vg.gamma(b, t), vg.counts(b, t)});
      bin_used[static_cast<std::size_t>(b)] = true;
      lag_used[static_cast<std::size_t>(t)] = true;
      gmax = std::max(gmax, vg.gamma(b, t));
    }
  const auto nb = std::count(bin_used.begin(), bin_used.end(), true);
  const auto nl = std::count(lag_used.begin(), lag_used.end(), true);
  if (cells.size() < 4 || nb < 2 || nl < 2)
    throw Error(ErrorCode::DegenerateGrid, "need >= 4 populated cells over >= 2 space bins and >= 2 lags");
  if (!(gmax > 0.0)) {
    // Identically zero field: no structure and no noise.
    SeparableFit fit;
    fit.params = init;
    fit.params.sill = 1e-12;
    fit.params.nugget = 0.0;
    return fit;
  }

  // Positivity by construction on log scale; bounds keep flat directions finite.
  const double lo_var = std::log(gmax * 1e-10), hi_var = std::log(gmax * 1e3);
  const double h_max = vg.space_bin_edges.back();
  const double lo_s = std::log(h_max * 1e-4), hi_s = std::log(h_max * 1e3);
  const double lo_t = std::log(1e-3), hi_t = std::log(1e3 * std::max(1, vg.max_time_lag));
  auto decode = [&](const Eigen::VectorXd& z) {
    SeparableCorrParams p;
    p.nugget = std::exp(std::clamp(z(0), lo_var, hi_var));
    p.sill = std::exp(std::clamp(z(1), lo_var, hi_var));
    p.theta_s = std::exp(std::clamp(z(2), lo_s, hi_s));
    p.theta_t = std::exp(std::clamp(z(3), lo_t, hi_t));
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& z) {
    const SeparableCorrParams p = decode(z);
    double total = 0.0;
    for (const auto& c : cells) {
      const double model = separable_variogram(c.h, c.u, p);
      const double r = c.gamma - model;
      total += c.weight * r * r / (model * model);
    }
    return total;
  };
  auto clamp_log = [](double v, double lo, double hi) { return std::clamp(std::log(std::max(v, 1e-300)), lo, hi); };
  Eigen::VectorXd z0(4);
  z0 << clamp_log(std::max(init.nugget, gmax * 1e-6), lo_var, hi_var), clamp_log(init.sill, lo_var, hi_var),
      clamp_log(init.theta_s, lo_s, hi_s), clamp_log(init.theta_t, lo_t, hi_t);

  NelderMeadOptions options;
  options.max_iterations = 500;
  const NelderMeadResult r = nelder_mead(objective, z0, options);
  if (!r.converged) throw Error(ErrorCode::NoConvergence, "variogram fit did not settle within the iteration cap");
  SeparableFit fit;
  fit.params = decode(r.x);
  // Parameters pinned at the lower variance bound are reported as exact zeros
  // for the nugget; the sill must stay positive.
  if (r.x(0) <= lo_var) fit.params.nugget = 0.0;
  // Ranges collapsed below the first populated lag leave the sill
  // indistinguishable from a nugget; report that fit as the pure nugget.
  double rho_max = 0.0;
  for (const auto& c : cells)
    rho_max = std::max(rho_max, std::exp(-c.h / fit.params.theta_s) * std::exp(-c.u / fit.params.theta_t));
  if (fit.params.sill * rho_max <= 1e-9 * (fit.params.sill + fit.params.nugget)) {
    const double floor = std::exp(lo_var);
    fit.params.nugget += fit.params.sill - floor;
    fit.params.sill = floor;
  }
  fit.objective = r.value;
  fit.iterations = r.iterations;
  fit.objective_trace = r.trace;
  return fit;
}

void write_variogram_csv(const VariogramGrid& vg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "space_bin_center,time_lag,gamma,count\n";
  char buf[128];
  for (Eigen::Index b = 0; b < vg.gamma.rows(); ++b)
    for (Eigen::Index t = 0; t < vg.gamma.cols(); ++t) {
      if (vg.counts(b, t) > 0)
        std::snprintf(buf, sizeof(buf), "%.6g,%ld,%.6g,%.0f\n", vg.bin_center(b), static_cast<long>(t), vg.gamma(b, t),
                      vg.counts(b, t));
      else
        std::snprintf(buf, sizeof(buf), "%.6g,%ld,NA,0\n", vg.bin_center(b), static_cast<long>(t));
      out << buf;
    }
}

}  // namespace pmst
