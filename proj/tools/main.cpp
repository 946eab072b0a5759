#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pmst/error.hpp"
#include "pmst/version.hpp"

using namespace pmst::cli;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

// Library errors that describe a bad request rather than a failed computation.
bool is_config_error(pmst::ErrorCode c) {
  using pmst::ErrorCode;
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidSpec:
    case ErrorCode::UnknownCovariate:
    case ErrorCode::UnknownVariable:
    case ErrorCode::InvalidStation:
    case ErrorCode::MissingColumn:
      return true;
    default:
      return false;
  }
}

struct Lists {
  std::vector<std::string> linear, smooth, exclude, sim_covariates;
};

void add_common(CLI::App* c, RunOptions& o) {
  c->add_option("--out", o.out, "Output directory")->capture_default_str();
  c->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  c->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c->add_flag("--allow-nonpositive", o.allow_nonpositive, "Accept responses <= 0 in the input");
}

void add_input(CLI::App* c, RunOptions& o) { c->add_option("--input", o.input, "Station-day CSV")->required(); }

void add_model_file(CLI::App* c, RunOptions& o) {
  c->add_option("--model", o.model_file, "Fitted model.json")->required();
  c->add_option("--train", o.train, "Training CSV of an HDGM model (default: --input)");
}

void add_variogram(CLI::App* c, RunOptions& o) {
  c->add_option("--space-bins", o.space_bins, "Number of distance bins")->capture_default_str();
  c->add_option("--max-distance", o.max_distance, "Largest distance in degrees (0: half the network diameter)")
      ->capture_default_str();
  c->add_option("--max-lag", o.max_lag, "Largest time lag in days")->capture_default_str();
}

void add_model_options(CLI::App* c, RunOptions& o, Lists& l) {
  c->add_option("--model", o.model, "hdgm, gamm, rfstk or baseline-mean")->capture_default_str();
  c->add_option("--linear", l.linear, "Linear covariates (comma separated)")->delimiter(',');
  c->add_option("--smooth", l.smooth, "Smooth covariates for gamm (comma separated)")->delimiter(',');
  c->add_flag("--no-month-dummies", o.no_month_dummies, "Drop the calendar-month indicators");
  c->add_option("--max-iter", o.max_iter, "HDGM EM iteration cap")->capture_default_str();
  c->add_option("--tol", o.tol, "HDGM relative log-likelihood tolerance")->capture_default_str();
  c->add_option("--knots", o.knots, "GAMM basis dimension per smooth")->capture_default_str();
  c->add_flag("--no-ar", o.no_ar, "GAMM without the AR(1) error");
  c->add_flag("--no-spatial", o.no_spatial, "GAMM without the spatial smooth");
  c->add_option("--n-tree", o.n_tree, "RFSTK number of trees")->capture_default_str();
  c->add_option("--mtry", o.mtry, "RFSTK features per split (0: p/3)")->capture_default_str();
  c->add_option("--min-leaf", o.min_leaf, "RFSTK minimum leaf size")->capture_default_str();
  c->add_option("--max-neighbors", o.max_neighbors, "RFSTK kriging neighbourhood")->capture_default_str();
  add_variogram(c, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pmst: spatiotemporal PM2.5 models (HDGM, GAMM, RFSTK)"};
  app.set_version_flag("--version", PMST_VERSION_STRING);
  app.require_subcommand(1);
  // Options of a subcommand live under a section of the same name, e.g. [fit].
  app.set_config("--config", "", "TOML file with option values; flags on the command line take precedence");
  app.fallthrough();
  RunOptions o;
  Lists l;

  auto* fit = app.add_subcommand("fit", "Fit a model and report in-sample metrics");
  add_common(fit, o);
  add_input(fit, o);
  add_model_options(fit, o, l);
  fit->add_option("--repeats", o.repeats, "Permutation repeats for the RFSTK importance table")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Predict every station-day of --input with a fitted model");
  add_common(predict, o);
  add_input(predict, o);
  add_model_file(predict, o);

  auto* cv = app.add_subcommand("cv", "Leave-one-station-out cross-validation");
  add_common(cv, o);
  add_input(cv, o);
  add_model_options(cv, o, l);
  cv->add_option("--validate-only", o.validate_only, "Validate only these station ids")->delimiter(',');
  cv->add_option("--exclude", l.exclude, "Station ids removed from training and validation (default: Moggio)")
      ->delimiter(',');
  cv->add_flag("--lagged-response", o.lagged_response, "Give held-out targets their own previous-day response");
  cv->add_option("--ma-window", o.ma_window, "Moving-average window in days")->capture_default_str();

  auto* variogram = app.add_subcommand("variogram", "Empirical space-time variogram and separable fit");
  add_common(variogram, o);
  add_input(variogram, o);
  add_variogram(variogram, o);
  variogram->add_option("--model", o.model_file, "Use the residuals of this fitted model.json");
  variogram->add_option("--train", o.train, "Training CSV of an HDGM model (default: --input)");
  variogram->add_flag("--svg", o.svg, "Also render SVG plots");

  auto* diagnose = app.add_subcommand("diagnose", "Residual SD by month, ACF and residual variogram");
  add_common(diagnose, o);
  add_input(diagnose, o);
  add_model_file(diagnose, o);
  add_variogram(diagnose, o);
  diagnose->add_flag("--svg", o.svg, "Also render SVG plots");

  auto* pdp = app.add_subcommand("pdp", "Partial dependence of the large-scale component");
  add_common(pdp, o);
  add_input(pdp, o);
  add_model_file(pdp, o);
  pdp->add_option("--variable", o.variables, "Covariates (comma separated; default: all)")->delimiter(',');
  pdp->add_option("--grid", o.grid, "Grid points per curve")->capture_default_str();
  pdp->add_flag("--svg", o.svg, "Also render SVG plots");

  auto* importance = app.add_subcommand("importance", "Out-of-bag permutation importance of an RFSTK forest");
  add_common(importance, o);
  add_input(importance, o);
  add_model_file(importance, o);
  importance->add_option("--repeats", o.repeats, "Permutation repeats")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Simulate a panel from the HDGM generative model");
  add_common(simulate, o);
  simulate->add_option("--stations", o.stations, "Number of stations")->capture_default_str();
  simulate->add_option("--days", o.days, "Number of days")->capture_default_str();
  simulate->add_option("--start", o.start, "First date")->capture_default_str();
  simulate->add_option("--g", o.g, "Latent AR(1) coefficient")->capture_default_str();
  simulate->add_option("--theta", o.theta, "Latent spatial range in degrees")->capture_default_str();
  simulate->add_option("--v", o.v, "Latent loading")->capture_default_str();
  simulate->add_option("--sigma2", o.sigma2, "Measurement-error variance")->capture_default_str();
  simulate->add_option("--beta", o.beta, "Intercept then one coefficient per covariate")->delimiter(',');
  simulate->add_option("--covariates", l.sim_covariates, "Covariate names (default: the reference set)")
      ->delimiter(',');
  simulate->add_option("--scheme", o.scheme, "Covariate generator: seasonal or iid")->capture_default_str();
  simulate->add_option("--missing-rate", o.missing_rate, "Fraction of cells to mask")->capture_default_str();
  simulate->add_option("--missing-pattern", o.missing_pattern, "random or block")->capture_default_str();
  simulate->add_option("--block-length", o.block_length, "Run length of block gaps")->capture_default_str();

  for (auto* c : {fit, cv}) c->add_flag("--svg", o.svg, "Also render SVG plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  o.command = chosen->get_name();
  auto given = [&](const char* name) {
    const CLI::Option* opt = chosen->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--linear")) o.linear = l.linear;
  if (given("--smooth")) o.smooth = l.smooth;
  if (given("--exclude")) o.exclude = l.exclude;
  if (given("--covariates")) o.sim_covariates = l.sim_covariates;

  try {
    if (o.command == "fit") cmd_fit(o);
    else if (o.command == "predict") cmd_predict(o);
    else if (o.command == "cv") cmd_cv(o);
    else if (o.command == "variogram") cmd_variogram(o);
    else if (o.command == "diagnose") cmd_diagnose(o);
    else if (o.command == "pdp") cmd_pdp(o);
    else if (o.command == "importance") cmd_importance(o);
    else if (o.command == "simulate") cmd_simulate(o);
  } catch (const ConfigError& e) {
    std::cerr << "pmst " << o.command << ": " << e.what() << '\n';
    return kUsage;
  } catch (const pmst::Error& e) {
    std::cerr << "pmst " << o.command << ": " << e.what() << '\n';
    return is_config_error(e.code()) ? kUsage : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "pmst " << o.command << ": " << e.what() << '\n';
    return kRuntime;
  }
  return 0;
}
