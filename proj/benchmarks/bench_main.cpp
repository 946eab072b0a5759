#include <benchmark/benchmark.h>

#include "pmst/forest.hpp"
#include "pmst/hdgm.hpp"
#include "pmst/rfstk.hpp"
#include "pmst/rng.hpp"
#include "pmst/simulate.hpp"
#include "pmst/variogram.hpp"

namespace {

pmst::sim::SimResult panel(std::size_t stations, std::size_t days) {
  pmst::sim::SimConfig cfg;
  cfg.num_stations = stations;
  cfg.days = days;
  cfg.covariates = {"x1", "x2", "x3"};
  cfg.params.beta = Eigen::Vector4d(30, 1, -2, 0.5);
  cfg.params.g = 0.72;
  cfg.params.theta = 0.79;
  cfg.params.v = 3;
  cfg.params.sigma2_eps = 2;
  cfg.seed = 42;
  return pmst::sim::simulate_hdgm(cfg);
}

// One filter plus smoother pass; cost grows like days * stations^3.
void BM_KalmanLoglik(benchmark::State& state) {
  const auto sim = panel(std::size_t(state.range(0)), 365);
  pmst::hdgm::HdgmParams p;
  p.beta = Eigen::Vector4d(30, 1, -2, 0.5);
  p.g = 0.7;
  p.theta = 0.8;
  p.v = 3;
  p.sigma2_eps = 2;
  const auto design = pmst::design_matrix(sim.data, sim.spec);
  for (auto _ : state) benchmark::DoNotOptimize(pmst::hdgm::kalman_loglik(sim.data, design, p).loglik);
}
BENCHMARK(BM_KalmanLoglik)->Arg(10)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_ForestFit(benchmark::State& state) {
  const auto n = Eigen::Index(state.range(0));
  pmst::CounterRng rng(3, 0);
  Eigen::MatrixXd x(n, 10);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
    y(i) = 10 * std::sin(3.14159 * x(i, 0) * x(i, 1)) + 5 * x(i, 2) + rng.normal();
  }
  pmst::forest::ForestConfig cfg;
  cfg.n_tree = 50;
  for (auto _ : state) benchmark::DoNotOptimize(pmst::forest::fit_forest(x, y, cfg).oob_mse);
  state.SetItemsProcessed(state.iterations() * cfg.n_tree);
}
BENCHMARK(BM_ForestFit)->Arg(1000)->Arg(5000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_EmpiricalVariogram(benchmark::State& state) {
  const auto sim = panel(std::size_t(state.range(0)), 365);
  const auto edges = pmst::default_space_edges(sim.data.stations());
  for (auto _ : state)
    benchmark::DoNotOptimize(pmst::empirical_variogram(sim.data.response(), sim.data.stations(), edges, 14));
}
BENCHMARK(BM_EmpiricalVariogram)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

// One ordinary-kriging system per call at the default neighbourhood.
void BM_KrigeResidual(benchmark::State& state) {
  const auto sim = panel(30, 200);
  pmst::rfstk::RfstkOptions opt;
  opt.forest.n_tree = 20;
  opt.kriging.max_neighbors = int(state.range(0));
  const auto fit = pmst::rfstk::fit_rfstk(sim.data, sim.spec, opt);
  pmst::Station target{"T", 46.0, 9.5, 200.0};
  std::ptrdiff_t day = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pmst::rfstk::krige_residual(fit, target, day).value);
    day = (day + 1) % 200;
  }
}
BENCHMARK(BM_KrigeResidual)->Arg(25)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
