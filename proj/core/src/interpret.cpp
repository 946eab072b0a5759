#include "pmst/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "pmst/error.hpp"
#include "pmst/parallel.hpp"
#include "pmst/rng.hpp"

namespace pmst {

using Index = Eigen::Index;

PdpCurve pdp(const std::function<double(const Eigen::VectorXd&)>& large_scale, const Eigen::MatrixXd& rows,
             Index column, std::string variable, const PdpOptions& options) {
  if (options.grid_size < 2) throw Error(ErrorCode::InvalidArgument, "grid_size must be >= 2");
  if (rows.rows() == 0) throw Error(ErrorCode::EmptyInput, "no rows to average over");
  if (column < 0 || column >= rows.cols()) throw Error(ErrorCode::UnknownVariable, variable);
  std::vector<Index> use(static_cast<std::size_t>(rows.rows()));
  std::iota(use.begin(), use.end(), 0);
  if (options.max_rows > 0 && use.size() > options.max_rows) {
    CounterRng rng(options.seed, 0);
    for (std::size_t k = 0; k < options.max_rows; ++k)
      std::swap(use[k], use[k + static_cast<std::size_t>(rng.below(use.size() - k))]);
    use.resize(options.max_rows);
    std::sort(use.begin(), use.end());
  }
  double lo = rows(use[0], column), hi = lo;
  for (Index r : use) {
    lo = std::min(lo, rows(r, column));
    hi = std::max(hi, rows(r, column));
  }
  PdpCurve curve;
  curve.variable = std::move(variable);
  Eigen::VectorXd x;
  for (int g = 0; g < options.grid_size; ++g) {
    const double v = g == options.grid_size - 1 ? hi : lo + (hi - lo) * g / (options.grid_size - 1);
    double sum = 0.0;
    for (Index r : use) {
      x = rows.row(r).transpose();
      x(column) = v;
      sum += large_scale(x);
    }
    curve.grid.push_back(v);
    curve.mean_prediction.push_back(sum / static_cast<double>(use.size()));
  }
  return curve;
}

PdpCurve pdp(const FittedModel& model, const Dataset& ds, const std::string& variable, const PdpOptions& options) {
  const auto covs = model.spec().covariates();
  if (std::find(covs.begin(), covs.end(), variable) == covs.end())
    throw Error(ErrorCode::UnknownVariable, variable + " is not a model covariate");
  const DesignMatrix dm = design_matrix(ds, model.spec());
  std::vector<Index> keep;
  for (Index r = 0; r < dm.x.rows(); ++r)
    if (dm.observed[static_cast<std::size_t>(r)] && dm.x.row(r).allFinite()) keep.push_back(r);
  Eigen::MatrixXd rows(static_cast<Index>(keep.size()), dm.x.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) rows.row(static_cast<Index>(k)) = dm.x.row(keep[k]);
  return pdp([&model](const Eigen::VectorXd& x) { return model.large_scale(x); }, rows,
             static_cast<Index>(*dm.column(variable)), variable, options);
}

namespace {

std::string g6(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

/// OOB mean squared error with the same accumulation order as fit_forest.
double oob_mse(const forest::Forest& f, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(y.size());
  Eigen::VectorXi count = Eigen::VectorXi::Zero(y.size());
  for (const auto& t : f.trees)
    for (std::size_t r : t.oob_indices) {
      sum(static_cast<Index>(r)) += t.predict(x.row(static_cast<Index>(r)));
      ++count(static_cast<Index>(r));
    }
  double sse = 0.0;
  std::size_t used = 0;
  for (Index r = 0; r < y.size(); ++r) {
    if (count(r) == 0) continue;
    const double e = y(r) - sum(r) / count(r);
    sse += e * e;
    ++used;
  }
  return used > 0 ? sse / static_cast<double>(used) : kNaN;
}

}  // namespace

void write_pdp_csv(const PdpCurve& curve, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "value,mean_prediction\n";
  for (std::size_t k = 0; k < curve.grid.size(); ++k) out << g6(curve.grid[k]) << ',' << g6(curve.mean_prediction[k]) << '\n';
}

ImportanceTable permutation_importance(const forest::Forest& forest, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, int n_repeat, std::uint64_t seed, unsigned threads) {
  if (x.rows() != y.size() || static_cast<std::size_t>(x.rows()) != forest.num_rows)
    throw Error(ErrorCode::LengthMismatch, "importance needs the forest's training rows");
  if (x.rows() < 2) throw Error(ErrorCode::InsufficientData, "importance needs at least 2 rows");
  if (n_repeat < 1) throw Error(ErrorCode::InvalidArgument, "n_repeat must be >= 1");
  ImportanceTable table;
  table.n_repeat = n_repeat;
  table.seed = seed;
  table.baseline_mse = oob_mse(forest, x, y);
  const auto p = static_cast<std::size_t>(x.cols());
  const auto n = static_cast<std::size_t>(x.rows());
  const auto reps = static_cast<std::size_t>(n_repeat);
  std::vector<double> increase(p * reps);
  parallel_for(p * reps, threads, [&](std::size_t task) {
    const std::size_t j = task % p, r = task / p;
    CounterRng rng(seed, task);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = n - 1; k > 0; --k) std::swap(perm[k], perm[static_cast<std::size_t>(rng.below(k + 1))]);
    Eigen::MatrixXd xp = x;
    for (std::size_t k = 0; k < n; ++k) xp(static_cast<Index>(k), static_cast<Index>(j)) = x(static_cast<Index>(perm[k]), static_cast<Index>(j));
    increase[r * p + j] = oob_mse(forest, xp, y) - table.baseline_mse;
  });
  for (std::size_t j = 0; j < p; ++j) {
    ImportanceRow row;
    row.variable = j < forest.features.size() ? forest.features[j] : "x" + std::to_string(j + 1);
    double s = 0.0, ss = 0.0;
    for (std::size_t r = 0; r < reps; ++r) s += increase[r * p + j];
    row.inc_mse = s / static_cast<double>(reps);
    for (std::size_t r = 0; r < reps; ++r) ss += (increase[r * p + j] - row.inc_mse) * (increase[r * p + j] - row.inc_mse);
    row.sd = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
    row.inc_mse_pct = table.baseline_mse > 0.0 ? 100.0 * row.inc_mse / table.baseline_mse : kNaN;
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ImportanceRow& a, const ImportanceRow& b) { return a.inc_mse > b.inc_mse; });
  return table;
}

void write_importance_csv(const ImportanceTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "variable,inc_mse,inc_mse_pct,sd\n";
  for (const auto& r : table.rows) out << r.variable << ',' << g6(r.inc_mse) << ',' << g6(r.inc_mse_pct) << ',' << g6(r.sd) << '\n';
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

namespace {

CoefficientRow linear_row(std::string name, double est, double se) {
  CoefficientRow row;
  row.name = std::move(name);
  row.estimate = est;
  row.std_error = se;
  if (std::isfinite(se) && se > 0.0) {
    row.t = est / se;
    row.p = normal_two_sided_p(row.t);
  }
  return row;
}

}  // namespace

std::vector<CoefficientRow> coefficient_report(const hdgm::HdgmParams& params, const std::vector<std::string>& labels,
                                               const Eigen::VectorXd& std_errors) {
  if (labels.size() != static_cast<std::size_t>(params.beta.size()) || std_errors.size() != params.beta.size())
    throw Error(ErrorCode::LengthMismatch, "labels, estimates and standard errors differ in length");
  std::vector<CoefficientRow> rows;
  for (Index c = 0; c < params.beta.size(); ++c)
    rows.push_back(linear_row(labels[static_cast<std::size_t>(c)], params.beta(c), std_errors(c)));
  return rows;
}

std::vector<CoefficientRow> coefficient_report(const gamm::GammFit& fit) {
  std::vector<CoefficientRow> rows;
  const Eigen::VectorXd se = fit.linear_standard_errors();
  for (Index c = 0; c < fit.beta_linear.size(); ++c)
    rows.push_back(linear_row(fit.linear_labels[static_cast<std::size_t>(c)], fit.beta_linear(c), se(c)));
  for (const auto& s : fit.smooths) {
    CoefficientRow row;
    row.name = "s(" + s.basis.covariate + ")";
    row.edf = s.edf;
    rows.push_back(row);
  }
  if (!fit.spatial_knots.empty()) {
    CoefficientRow row;
    row.name = "C(s)";
    row.edf = fit.spatial_edf;
    rows.push_back(row);
  }
  return rows;
}

void write_coefficient_csv(const std::vector<CoefficientRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "name,estimate,std_error,t,p,edf\n";
  for (const auto& r : rows)
    out << r.name << ',' << g6(r.estimate) << ',' << g6(r.std_error) << ',' << g6(r.t) << ',' << g6(r.p) << ','
        << g6(r.edf) << '\n';
}

}  // namespace pmst
