#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "pmst/error.hpp"
#include "pmst/rfstk.hpp"
#include "support.hpp"

using namespace pmst;
using namespace pmst::rfstk;

namespace {

struct Setup {
  sim::SimResult sim;
  RfstkFit fit;
};

Setup small_fit(std::uint64_t seed, std::size_t n = 8, std::size_t days = 60, int trees = 30) {
  Setup s{testing::simulate(n, days, 0.6, 0.5, 2.0, 0.5, Eigen::Vector3d(10.0, 2.0, -1.0), seed), {}};
  RfstkOptions opt;
  opt.forest.n_tree = trees;
  opt.forest.seed = seed;
  opt.variogram.max_time_lag = 5;
  s.fit = fit_rfstk(s.sim.data, s.sim.spec, opt);
  return s;
}

// Ordinary kriging through the bordered (n+1) system solved by LU.
Eigen::VectorXd bordered_weights(const RfstkFit& fit, const Station& target, std::ptrdiff_t day,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& nb) {
  const auto& p = fit.residual_cov;
  const auto n = static_cast<Eigen::Index>(nb.size());
  const double jit = fit.kriging.jitter * (p.sill + p.nugget);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd rhs(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [si, ti] = nb[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto [sj, tj] = nb[static_cast<std::size_t>(j)];
      const double h = great_circle_deg(fit.stations[si], fit.stations[sj]);
      const double u = std::abs(double(ti) - double(tj));
      a(i, j) = p.sill * std::exp(-h / p.theta_s - u / p.theta_t) + (i == j ? p.nugget + jit : 0.0);
    }
    a(i, n) = a(n, i) = 1.0;
    rhs(i) = p.sill * std::exp(-great_circle_deg(target, fit.stations[si]) / p.theta_s -
                               std::abs(double(ti) - double(day)) / p.theta_t);
  }
  rhs(n) = 1.0;
  return a.fullPivLu().solve(rhs).head(n);
}

// The m smallest scaled distances over every observed residual cell.
std::vector<std::pair<std::size_t, std::size_t>> nearest_cells(const RfstkFit& fit, const Station& target,
                                                                std::ptrdiff_t day, std::size_t m) {
  using Cand = std::tuple<double, std::size_t, std::size_t>;
  std::vector<Cand> all;
  const auto& r = fit.train_residuals;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index t = 0; t < r.cols(); ++t)
      if (std::isfinite(r(i, t)))
        all.emplace_back(great_circle_deg(target, fit.stations[static_cast<std::size_t>(i)]) / fit.residual_cov.theta_s +
                             std::abs(double(t) - double(day)) / fit.residual_cov.theta_t,
                         static_cast<std::size_t>(i), static_cast<std::size_t>(t));
  std::sort(all.begin(), all.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < std::min(m, all.size()); ++k) out.emplace_back(std::get<1>(all[k]), std::get<2>(all[k]));
  return out;
}

}  // namespace

TEST_CASE("neighbour search and weights match a brute-force kriging system") {
  Setup s = small_fit(1);
  s.fit.kriging.max_neighbors = 25;
  const Station target{"T", 46.1, 9.4, 300.0};
  for (std::ptrdiff_t day : {0, 17, 59, 75}) {
    const KrigingResult k = krige_residual(s.fit, target, day);
    const auto nb = nearest_cells(s.fit, target, day, 25);
    std::vector<std::pair<std::size_t, std::size_t>> got = k.neighbors, want = nb;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);
    const Eigen::VectorXd w = bordered_weights(s.fit, target, day, k.neighbors);
    CHECK((k.weights - w).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(k.weights.sum() - 1.0) < 1e-10);
    CHECK(k.variance >= 0.0);
  }
}

TEST_CASE("without a nugget kriging reproduces an observed residual") {
  Setup s = small_fit(2);
  s.fit.residual_cov.nugget = 0.0;
  for (std::size_t i : {0u, 3u, 7u})
    for (std::ptrdiff_t t : {5, 30}) {
      const double r = s.fit.train_residuals(static_cast<Eigen::Index>(i), t);
      if (!std::isfinite(r)) continue;
      const KrigingResult k = krige_residual(s.fit, s.fit.stations[i], t);
      CHECK(std::abs(k.value - r) < 1e-6);
      CHECK(k.variance < 1e-6 * s.fit.residual_cov.sill);
    }
}

TEST_CASE("a pure nugget averages the neighbours") {
  Setup s = small_fit(3);
  s.fit.residual_cov.sill = 0.0;
  s.fit.residual_cov.nugget = 1.3;
  s.fit.kriging.max_neighbors = 12;
  const KrigingResult k = krige_residual(s.fit, {"T", 46.0, 9.0, 0.0}, 20);
  REQUIRE(k.neighbors.size() == 12);
  double mean = 0.0;
  for (const auto& [i, t] : k.neighbors) mean += s.fit.train_residuals(Eigen::Index(i), Eigen::Index(t)) / 12.0;
  CHECK(k.value == doctest::Approx(mean).epsilon(1e-10));
  for (Eigen::Index a = 0; a < k.weights.size(); ++a) CHECK(k.weights(a) == doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(std::abs(k.weights.sum() - 1.0) < 1e-10);
}

TEST_CASE("the forest step is the plain forest on the design") {
  Setup s = small_fit(4);
  const DesignMatrix dm = design_matrix(s.sim.data, s.sim.spec);
  const auto T = static_cast<Eigen::Index>(s.sim.data.num_days());
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < dm.x.rows(); ++r)
    if (dm.observed[static_cast<std::size_t>(r)]) rows.push_back(r);
  Eigen::MatrixXd x(Eigen::Index(rows.size()), dm.x.cols() - 1);
  Eigen::VectorXd y(x.rows());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    x.row(Eigen::Index(a)) = dm.x.row(rows[a]).tail(x.cols());
    y(Eigen::Index(a)) = s.sim.data.response()(rows[a] / T, rows[a] % T);
  }
  forest::ForestConfig cfg;
  cfg.n_tree = 30;
  cfg.seed = 4;
  const forest::Forest f = forest::fit_forest(x, y, cfg);
  CHECK(forest::to_json(f)["trees"].dump() == forest::to_json(s.fit.forest)["trees"].dump());
  // In-sample residuals are response minus forest.
  for (std::size_t a = 0; a < rows.size(); a += 37)
    CHECK(s.fit.train_residuals(rows[a] / T, rows[a] % T) == y(Eigen::Index(a)) - f.predict(x.row(Eigen::Index(a))));
}

TEST_CASE("prediction is forest plus kriged residual and survives JSON") {
  Setup s = small_fit(5);
  const auto targets = make_targets(s.sim.data, s.sim.spec, 2, s.sim.data.start_date());
  const auto pred = predict_rfstk(s.fit, targets);
  const RfstkFit back = fit_from_json(nlohmann::json::parse(to_json(s.fit).dump()));
  const auto again = predict_rfstk(back, targets);
  for (std::size_t k = 0; k < targets.size(); k += 7) {
    const double expect = s.fit.large_scale(targets[k].x) + krige_residual(s.fit, targets[k].station, targets[k].day).value;
    CHECK(pred[k].mean == expect);
    CHECK(again[k].mean == doctest::Approx(pred[k].mean).epsilon(1e-12));
    CHECK(again[k].variance == doctest::Approx(pred[k].variance).epsilon(1e-9));
  }
  PredictionTarget bad = targets[0];
  bad.x(1) = kNaN;
  try {
    (void)predict_rfstk(s.fit, std::span(&bad, 1));
    FAIL("expected MissingTargetCovariate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingTargetCovariate);
  }
}

TEST_CASE("white-noise residuals get a small kriging adjustment") {
  const auto st = testing::random_stations(10, 6);
  CounterRng rng(6);
  Eigen::MatrixXd z(10, 150);
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  Dataset ds = testing::panel(st, z, 2, 6);
  RfstkOptions opt;
  opt.forest.n_tree = 40;
  opt.variogram.max_time_lag = 5;
  const RfstkFit fit = fit_rfstk(ds, testing::linear_spec({"x1", "x2"}), opt);
  const Eigen::MatrixXd& r = fit.train_residuals;
  const double sd = std::sqrt(r.array().square().mean());
  double mean_abs = 0.0;
  int n = 0;
  for (double lat = 45.2; lat < 47.0; lat += 0.4)
    for (std::ptrdiff_t day = 10; day < 150; day += 20) {
      mean_abs += std::abs(krige_residual(fit, {"T", lat, 9.5, 0.0}, day).value);
      ++n;
    }
  CHECK(mean_abs / n < 0.25 * sd);
}

TEST_CASE("residual variography recovers the latent ranges") {
  // xi has covariance exp(-u / 0.78) exp(-h / 0.48) when g = exp(-1 / 0.78).
  const double g = std::exp(-1.0 / 0.78);
  const auto sim = testing::simulate(30, 300, g, 0.48, 3.0, 0.25, Eigen::Vector3d(20.0, 3.0, -2.0), 7);
  RfstkOptions opt;
  opt.forest.n_tree = 60;
  opt.variogram.max_time_lag = 6;
  const RfstkFit fit = fit_rfstk(sim.data, sim.spec, opt);
  MESSAGE("theta_s " << fit.residual_cov.theta_s << " theta_t " << fit.residual_cov.theta_t);
  CHECK(std::abs(fit.residual_cov.theta_s / 0.48 - 1.0) < 0.3);
  CHECK(std::abs(fit.residual_cov.theta_t / 0.78 - 1.0) < 0.3);
}

TEST_CASE("rfstk contract") {
  const auto st = testing::random_stations(4, 8);
  Dataset ds = testing::panel(st, Eigen::MatrixXd::Zero(4, 20), 1, 8);
  CHECK_THROWS_AS((void)fit_rfstk(ds, testing::linear_spec({}), {}), Error);
  CHECK_THROWS_AS((void)fit_rfstk(ds, testing::linear_spec({"nope"}), {}), Error);
}
