// End-to-end tests of the pmst executable. Each case runs the binary in a scratch
// directory and checks its files against values computed here.
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pmst/data.hpp"
#include "pmst/variogram.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using testing::scratch_dir;
using testing::slurp;

namespace {

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string("\"") + PMST_CLI_PATH + "\" " + args;
  cmd += log.empty() ? " >/dev/null 2>&1" : " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

/// Writes a small panel with every reference covariate set to zero.
void write_toy(const fs::path& path, const std::vector<std::string>& ids, const std::vector<std::vector<double>>& z) {
  std::ofstream out(path);
  out << "IDStations,Latitude,Longitude,Time,AQ_pm25";
  for (const auto& c : pmst::default_covariate_names()) out << ',' << c;
  out << '\n';
  const char* dates[] = {"2018-03-01", "2018-03-02", "2018-03-03"};
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t t = 0; t < z[i].size(); ++t) {
      out << ids[i] << ',' << 45.0 + 0.1 * double(i) << ',' << 9.0 + 0.2 * double(i) << ',' << dates[t] << ','
          << z[i][t];
      for (const auto& c : pmst::default_covariate_names()) out << ',' << (c == "Altitude" ? "100" : "0");
      out << '\n';
    }
}

const std::vector<std::string> kToyIds = {"A", "B", "C", "D"};
const std::vector<std::vector<double>> kToyZ = {{10, 12, 5}, {20, 14, 7}, {30, 16, 9}, {40, 18, 50}};

/// Pooled LOSOCV mse of the daily-mean baseline, by brute force.
double toy_cv_mse(const std::vector<std::string>& validate, const std::vector<std::string>& exclude) {
  double sse = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < kToyIds.size(); ++i) {
    auto in = [&](const std::vector<std::string>& v, const std::string& id) {
      return std::find(v.begin(), v.end(), id) != v.end();
    };
    if (in(exclude, kToyIds[i]) || (!validate.empty() && !in(validate, kToyIds[i]))) continue;
    for (std::size_t t = 0; t < 3; ++t) {
      double s = 0.0;
      int c = 0;
      for (std::size_t j = 0; j < kToyIds.size(); ++j)
        if (j != i && !in(exclude, kToyIds[j])) s += kToyZ[j][t], ++c;
      const double e = kToyZ[i][t] - s / c;
      sse += e * e;
      ++n;
    }
  }
  return sse / n;
}

}  // namespace

TEST_CASE("simulate then fit hdgm recovers the coefficients") {
  const fs::path dir = scratch_dir("cli_roundtrip");
  const std::string data = (dir / "sim" / "data.csv").string();
  REQUIRE(run("simulate --stations 16 --days 300 --g 0.72 --theta 0.79 --v 2 --sigma2 1 --covariates "
              "WE_temp_2m,WE_rh_mean --beta 30,2,-1 --scheme iid --seed 5 --out " + (dir / "sim").string()) == 0);
  const json truth = read_json(dir / "sim" / "truth.json");
  CHECK(truth.dump().find("0.72") != std::string::npos);

  REQUIRE(run("fit --model hdgm --linear WE_temp_2m,WE_rh_mean --no-month-dummies --input " + data + " --out " +
              (dir / "fit").string()) == 0);
  std::map<std::string, double> est;
  for (const auto& row : read_rows(dir / "fit" / "coefficients.csv"))
    if (row.size() > 1 && row[0] != "name") est[row[0]] = std::stod(row[1]);
  CHECK(est.at("(Intercept)") == doctest::Approx(30).epsilon(0.05));
  CHECK(est.at("WE_temp_2m") == doctest::Approx(2).epsilon(0.1));
  CHECK(est.at("WE_rh_mean") == doctest::Approx(-1).epsilon(0.1));
  for (const char* f : {"model.json", "insample_metrics.csv", "loglik_trace.csv", "manifest.json"})
    CHECK(fs::exists(dir / "fit" / f));

  // The fitted model predicts its own training data.
  REQUIRE(run("predict --model " + (dir / "fit" / "model.json").string() + " --input " + data + " --out " +
              (dir / "pred").string()) == 0);
  const auto rows = read_rows(dir / "pred" / "predictions.csv");
  CHECK(rows.size() == 16 * 300 + 1);
  CHECK(rows[0] == std::vector<std::string>{"station_id", "date", "observed", "predicted", "variance", "fallback"});
}

TEST_CASE("simulate is deterministic in the seed") {
  const fs::path dir = scratch_dir("cli_sim_seed");
  for (const char* name : {"a", "b"})
    REQUIRE(run("simulate --stations 5 --days 40 --seed 9 --out " + (dir / name).string()) == 0);
  REQUIRE(run("simulate --stations 5 --days 40 --seed 10 --out " + (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "data.csv") == slurp(dir / "b" / "data.csv"));
  CHECK(slurp(dir / "a" / "data.csv") != slurp(dir / "c" / "data.csv"));
  CHECK(read_json(dir / "a" / "manifest.json")["seed"] == 9);
}

TEST_CASE("rfstk fit is byte-identical across runs and thread counts") {
  const fs::path dir = scratch_dir("cli_rfstk");
  REQUIRE(run("simulate --stations 8 --days 60 --seed 3 --out " + (dir / "sim").string()) == 0);
  const std::string base = "fit --model rfstk --n-tree 20 --seed 11 --input " + (dir / "sim" / "data.csv").string();
  REQUIRE(run(base + " --threads 1 --out " + (dir / "r1").string()) == 0);
  REQUIRE(run(base + " --threads 4 --out " + (dir / "r2").string()) == 0);
  for (const char* f : {"model.json", "insample_metrics.csv", "importance.csv", "residual_variogram.csv",
                        "manifest.json"})
    CHECK_MESSAGE(slurp(dir / "r1" / f) == slurp(dir / "r2" / f), f);
}

TEST_CASE("manifest hash tracks result-relevant options only") {
  const fs::path dir = scratch_dir("cli_manifest");
  REQUIRE(run("simulate --stations 6 --days 40 --seed 2 --out " + (dir / "sim").string()) == 0);
  const std::string data = (dir / "sim" / "data.csv").string();
  auto hash = [&](const std::string& extra, const std::string& name) {
    REQUIRE(run("fit --model gamm --no-spatial --input " + data + " " + extra + " --out " + (dir / name).string()) ==
            0);
    return read_json(dir / name / "manifest.json")["config_hash"].get<std::string>();
  };
  const std::string h0 = hash("", "a");
  CHECK(hash("--threads 3", "b") == h0);
  CHECK(hash("--knots 6", "c") != h0);
  CHECK(hash("--no-ar", "d") != h0);

  const json m = read_json(dir / "a" / "manifest.json");
  CHECK(m["command"] == "fit");
  for (const auto& f : m["files"]) CHECK(fs::file_size(dir / "a" / f["path"].get<std::string>()) == f["bytes"]);
}

TEST_CASE("cv with the daily-mean baseline matches a hand computation") {
  const fs::path dir = scratch_dir("cli_cv");
  const fs::path data = dir / "toy.csv";
  write_toy(data, kToyIds, kToyZ);

  REQUIRE(run("cv --model baseline-mean --input " + data.string() + " --out " + (dir / "all").string()) == 0);
  json pooled = read_json(dir / "all" / "cv_pooled.json");
  CHECK(pooled["folds"] == 4);
  CHECK(pooled["pooled"]["n"] == 12);
  CHECK(pooled["pooled"]["mse"].get<double>() == doctest::Approx(toy_cv_mse({}, {})).epsilon(1e-12));
  CHECK(read_rows(dir / "all" / "cv_predictions.csv").size() == 13);

  REQUIRE(run("cv --model baseline-mean --validate-only B,C --input " + data.string() + " --out " +
              (dir / "bc").string()) == 0);
  pooled = read_json(dir / "bc" / "cv_pooled.json");
  CHECK(pooled["folds"] == 2);
  CHECK(pooled["pooled"]["mse"].get<double>() == doctest::Approx(toy_cv_mse({"B", "C"}, {})).epsilon(1e-12));

  REQUIRE(run("cv --model baseline-mean --exclude D --input " + data.string() + " --out " + (dir / "xd").string()) ==
          0);
  pooled = read_json(dir / "xd" / "cv_pooled.json");
  CHECK(pooled["folds"] == 3);
  CHECK(pooled["excluded"] == json::array({"D"}));
  CHECK(pooled["pooled"]["mse"].get<double>() == doctest::Approx(toy_cv_mse({}, {"D"})).epsilon(1e-12));

  CHECK(run("cv --model baseline-mean --validate-only Z --input " + data.string() + " --out " +
            (dir / "z").string()) == 2);
}

TEST_CASE("pdp writes one row per grid point") {
  const fs::path dir = scratch_dir("cli_pdp");
  REQUIRE(run("simulate --stations 6 --days 60 --seed 4 --out " + (dir / "sim").string()) == 0);
  const std::string data = (dir / "sim" / "data.csv").string();
  REQUIRE(run("fit --model gamm --no-spatial --input " + data + " --out " + (dir / "fit").string()) == 0);
  REQUIRE(run("pdp --variable WE_temp_2m,LA_hvi --svg --model " + (dir / "fit" / "model.json").string() +
              " --input " + data + " --out " + (dir / "pdp").string()) == 0);
  for (const char* f : {"pdp_WE_temp_2m.csv", "pdp_LA_hvi.csv"}) CHECK(read_rows(dir / "pdp" / f).size() == 51);
  CHECK(fs::exists(dir / "pdp" / "pdp_WE_temp_2m.svg"));
  CHECK(run("pdp --variable Nope --model " + (dir / "fit" / "model.json").string() + " --input " + data +
            " --out " + (dir / "bad").string()) == 2);
}

TEST_CASE("variogram command equals the library computation") {
  const fs::path dir = scratch_dir("cli_variogram");
  REQUIRE(run("simulate --stations 10 --days 80 --seed 6 --out " + (dir / "sim").string()) == 0);
  const fs::path data = dir / "sim" / "data.csv";
  REQUIRE(run("variogram --space-bins 6 --max-lag 5 --input " + data.string() + " --out " + (dir / "vg").string()) ==
          0);

  pmst::CsvSchema schema;
  schema.covariates = {};
  const pmst::Dataset ds = pmst::load_csv(data, schema);
  pmst::VariogramSettings vs;
  vs.num_space_bins = 6;
  vs.max_time_lag = 5;
  const auto vg = pmst::empirical_variogram(ds.response(), ds.stations(), pmst::default_space_edges(ds.stations(), vs),
                                            vs.max_time_lag);
  pmst::write_variogram_csv(vg, dir / "expected.csv");
  CHECK(slurp(dir / "vg" / "variogram.csv") == slurp(dir / "expected.csv"));
  CHECK(read_json(dir / "vg" / "variogram_fit.json")["separable"].contains("theta_s"));
}

TEST_CASE("config file supplies options and flags override it") {
  const fs::path dir = scratch_dir("cli_config");
  REQUIRE(run("simulate --stations 6 --days 40 --seed 8 --out " + (dir / "sim").string()) == 0);
  {
    std::ofstream toml(dir / "run.toml");
    toml << "[fit]\nmodel = \"gamm\"\nknots = 6\nno-spatial = true\ninput = \""
         << (dir / "sim" / "data.csv").string() << "\"\n";
  }
  const std::string cfg = "fit --config " + (dir / "run.toml").string();
  REQUIRE(run(cfg + " --out " + (dir / "a").string()) == 0);
  json m = read_json(dir / "a" / "manifest.json")["config"];
  CHECK(m["fit"]["model"] == "gamm");
  CHECK(m["fit"]["spatial"] == false);
  CHECK(m["fit"]["knots"] == 6);
  REQUIRE(run(cfg + " --knots 5 --out " + (dir / "b").string()) == 0);
  CHECK(read_json(dir / "b" / "manifest.json")["config"]["fit"]["knots"] == 5);
}

TEST_CASE("exit codes separate usage errors from runtime failures") {
  const fs::path dir = scratch_dir("cli_exit");
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("fit --no-such-flag") == 2);
  CHECK(run("fit --input " + (dir / "missing.csv").string()) == 2);

  write_toy(dir / "toy.csv", kToyIds, kToyZ);
  const std::string toy = (dir / "toy.csv").string();
  CHECK(run("fit --model nonsense --input " + toy + " --out " + (dir / "o").string()) == 2);
  CHECK(run("fit --model gamm --smooth Nope --input " + toy + " --out " + (dir / "o").string()) == 2);
  CHECK(run("fit --model hdgm --smooth WE_temp_2m --input " + toy + " --out " + (dir / "o").string()) == 2);

  // Malformed content is a runtime failure, not a usage error.
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "IDStations,Latitude,Longitude,Time,AQ_pm25,Altitude\nA,45,9,not-a-date,3,100\n";
  }
  CHECK(run("variogram --input " + (dir / "bad.csv").string() + " --out " + (dir / "o").string()) == 3);
  {
    std::ofstream bad(dir / "model.json");
    bad << "{ not json";
  }
  const fs::path log = dir / "log.txt";
  CHECK(run("predict --model " + (dir / "model.json").string() + " --input " + toy + " --out " +
                (dir / "o").string(),
            log) == 3);
  CHECK(slurp(log).find("pmst predict:") != std::string::npos);
}
