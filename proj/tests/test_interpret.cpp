#include <doctest.h>

#include <cmath>

#include "pmst/error.hpp"
#include "pmst/interpret.hpp"
#include "support.hpp"

using namespace pmst;

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = rng.normal();
  return x;
}

// y = 5 x1 + noise; the other columns are unused.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> one_signal(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Eigen::MatrixXd x = normal_matrix(n, p, seed);
  CounterRng rng(seed, 5);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) y(r) = 5.0 * x(r, 0) + 0.5 * rng.normal();
  return {x, y};
}

double importance_of(const ImportanceTable& t, const std::string& name) {
  for (const auto& r : t.rows)
    if (r.variable == name) return r.inc_mse;
  FAIL("missing variable " << name);
  return kNaN;
}

}  // namespace

TEST_CASE("partial dependence equals the brute-force average") {
  auto [x, y] = one_signal(50, 3, 1);
  forest::ForestConfig cfg;
  cfg.n_tree = 20;
  const forest::Forest f = forest::fit_forest(x, y, cfg);
  const auto predict = [&](const Eigen::VectorXd& row) { return f.predict(row.transpose()); };
  PdpOptions opt;
  opt.grid_size = 7;
  const PdpCurve c = pdp(predict, x, 0, "x1", opt);
  REQUIRE(c.grid.size() == 7);
  const double lo = x.col(0).minCoeff(), hi = x.col(0).maxCoeff();
  CHECK(c.grid.front() == lo);
  CHECK(c.grid.back() == hi);
  for (std::size_t g = 0; g < 7; ++g) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < 50; ++r) {
      Eigen::RowVectorXd row = x.row(r);
      row(0) = c.grid[g];
      s += f.predict(row);
    }
    CHECK(std::abs(c.mean_prediction[g] - s / 50) < 1e-12);
    if (g > 0) CHECK(c.grid[g] > c.grid[g - 1]);
  }
}

TEST_CASE("partial dependence of a linear predictor is a line with slope beta") {
  const Eigen::MatrixXd x = normal_matrix(40, 4, 2);
  const Eigen::Vector4d beta(1.0, -2.0, 0.5, 3.0);
  const auto linear = [&](const Eigen::VectorXd& row) { return beta.dot(row); };
  for (Eigen::Index j = 0; j < 4; ++j) {
    const PdpCurve c = pdp(linear, x, j, "v");
    for (std::size_t g = 1; g < c.grid.size(); ++g) {
      const double slope = (c.mean_prediction[g] - c.mean_prediction[g - 1]) / (c.grid[g] - c.grid[g - 1]);
      CHECK(std::abs(slope - beta(j)) < 1e-10);
    }
  }
  const PdpCurve flat = pdp([](const Eigen::VectorXd&) { return 2.5; }, x, 1, "v");
  for (double m : flat.mean_prediction) CHECK(m == 2.5);
}

TEST_CASE("partial dependence subsampling is seeded") {
  const Eigen::MatrixXd x = normal_matrix(300, 2, 3);
  const auto nonlinear = [](const Eigen::VectorXd& r) { return std::sin(r(0)) * r(1) * r(1); };
  PdpOptions opt;
  opt.max_rows = 100;
  const PdpCurve a = pdp(nonlinear, x, 0, "v", opt), b = pdp(nonlinear, x, 0, "v", opt);
  CHECK(a.mean_prediction == b.mean_prediction);
  opt.seed = 2;
  CHECK(pdp(nonlinear, x, 0, "v", opt).mean_prediction != a.mean_prediction);
  CHECK_THROWS_AS((void)pdp(nonlinear, x, 2, "v"), Error);
  opt.grid_size = 1;
  CHECK_THROWS_AS((void)pdp(nonlinear, x, 0, "v", opt), Error);
}

TEST_CASE("partial dependence of a fitted HDGM follows its coefficient") {
  const auto sim = testing::simulate(5, 60, 0.5, 0.5, 1.0, 0.5, Eigen::Vector3d(3.0, 2.0, -1.0), 4);
  ModelConfig cfg;
  cfg.spec = sim.spec;
  cfg.em.max_iter = 20;
  const auto model = fit_model(sim.data, cfg);
  const auto& hm = dynamic_cast<const HdgmModel&>(*model);
  const PdpCurve c = pdp(*model, sim.data, "x2");
  const double slope = (c.mean_prediction.back() - c.mean_prediction.front()) / (c.grid.back() - c.grid.front());
  CHECK(slope == doctest::Approx(hm.em().params.beta(2)).epsilon(1e-9));
  try {
    (void)pdp(*model, sim.data, "Altitude");
    FAIL("expected UnknownVariable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownVariable);
  }
  const auto dir = testing::scratch_dir("pdp_csv");
  write_pdp_csv(c, dir / "pdp.csv");
  const std::string text = testing::slurp(dir / "pdp.csv");
  CHECK(text.rfind("value,mean_prediction\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 51);
}

TEST_CASE("permutation importance finds the signal") {
  auto [x, y] = one_signal(400, 4, 5);
  forest::ForestConfig cfg;
  cfg.n_tree = 100;
  const forest::Forest f = forest::fit_forest(x, y, cfg, {"a", "b", "c", "d"});
  const ImportanceTable t = permutation_importance(f, x, y, 5, 9);
  CHECK(t.baseline_mse == f.oob_mse);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0].variable == "a");
  const double signal = importance_of(t, "a");
  for (const std::string v : {"b", "c", "d"}) {
    CHECK(signal > 10 * std::abs(importance_of(t, v)));
    CHECK(std::abs(importance_of(t, v)) < 0.2 * t.baseline_mse);
  }
  for (std::size_t k = 1; k < t.rows.size(); ++k) CHECK(t.rows[k - 1].inc_mse >= t.rows[k].inc_mse);
  CHECK(t.rows[0].inc_mse_pct == doctest::Approx(100 * signal / t.baseline_mse));
  CHECK(t.rows[0].sd >= 0.0);

  SUBCASE("thread count does not change the table") {
    const ImportanceTable u = permutation_importance(f, x, y, 5, 9, 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(u.rows[k].inc_mse == t.rows[k].inc_mse);
  }
  SUBCASE("a duplicated feature dilutes the importance") {
    Eigen::MatrixXd xd(x.rows(), 5);
    xd << x, x.col(0);
    const forest::Forest g = forest::fit_forest(xd, y, cfg, {"a", "b", "c", "d", "a2"});
    const ImportanceTable td = permutation_importance(g, xd, y, 5, 9);
    CHECK(importance_of(td, "a") < signal);
    CHECK(importance_of(td, "a2") > 0.0);
  }
  SUBCASE("CSV layout") {
    const auto dir = testing::scratch_dir("importance_csv");
    write_importance_csv(t, dir / "imp.csv");
    const std::string text = testing::slurp(dir / "imp.csv");
    CHECK(text.rfind("variable,inc_mse,inc_mse_pct,sd\na,", 0) == 0);
  }
  CHECK_THROWS_AS((void)permutation_importance(f, x.topRows(10), y.head(10)), Error);
  CHECK_THROWS_AS((void)permutation_importance(f, x, y, 0), Error);
}

TEST_CASE("two-sided normal p-values") {
  CHECK(normal_two_sided_p(0.0) == doctest::Approx(1.0));
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(normal_two_sided_p(-2.5758293035489) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("coefficient report of an intercept-only model") {
  hdgm::HdgmParams p;
  p.beta = Eigen::VectorXd::Constant(1, 4.0);
  const auto rows = coefficient_report(p, {"(Intercept)"}, Eigen::VectorXd::Constant(1, 2.0));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].name == "(Intercept)");
  CHECK(rows[0].t == 2.0);
  CHECK(rows[0].p == doctest::Approx(normal_two_sided_p(2.0)));
  CHECK(std::isnan(rows[0].edf));
  CHECK_THROWS_AS((void)coefficient_report(p, {"a", "b"}, Eigen::VectorXd::Constant(1, 2.0)), Error);

  const auto dir = testing::scratch_dir("coef_csv");
  write_coefficient_csv(rows, dir / "coef.csv");
  CHECK(testing::slurp(dir / "coef.csv") == "name,estimate,std_error,t,p,edf\n(Intercept),4,2,2,0.0455003,NA\n");
}

TEST_CASE("GAMM coefficient report carries an edf row per smooth") {
  const auto st = testing::random_stations(5, 6);
  CounterRng rng(6);
  Eigen::MatrixXd z(5, 80);
  Dataset tmp = testing::panel(st, Eigen::MatrixXd::Zero(5, 80), 2, 6);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index t = 0; t < 80; ++t)
      z(i, t) = 1.0 + 2.0 * tmp.covariates()[0].values(i, t) + std::sin(tmp.covariates()[1].values(i, t)) +
                0.3 * rng.normal();
  const Dataset ds = testing::panel(st, z, 2, 6);
  ModelSpec spec = testing::linear_spec({"x1"});
  spec.smooth_terms = {"x2"};
  gamm::GammOptions opt;
  opt.estimate_ar = false;
  const gamm::GammFit fit = gamm::fit_gamm(ds, spec, opt);
  const auto rows = coefficient_report(fit);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].name == "x1");
  CHECK(rows[1].estimate == doctest::Approx(2.0).epsilon(0.05));
  CHECK(rows[1].p < 1e-6);
  CHECK(rows[2].name == "s(x2)");
  CHECK(rows[2].edf > 1.0);
  CHECK(std::isnan(rows[2].estimate));
  CHECK(rows[3].name == "C(s)");
  CHECK(rows[3].edf >= 0.0);
}
