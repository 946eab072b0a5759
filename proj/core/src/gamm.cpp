#include "pmst/gamm.hpp"

#include <algorithm>
#include <cmath>

#include "pmst/error.hpp"
#include "pmst/parallel.hpp"

namespace pmst::gamm {

using Index = Eigen::Index;

namespace {

/// A penalised group of columns: constrained basis of one smooth or of C(s).
struct Block {
  Index offset = 0, size = 0;
  Eigen::MatrixXd z;        // raw-to-constrained map, raw x size
  Eigen::MatrixXd root;     // rank x size, root' root = constrained penalty
  Eigen::MatrixXd penalty;  // size x size
  double scale = 1.0;
};

struct Problem {
  Eigen::MatrixXd x;  // usable rows x columns, undifferenced
  Eigen::VectorXd z;
  std::vector<Index> prev;  // row of the same station's previous day, -1 if unusable
  std::vector<Index> active_linear;  // linear design columns kept
  Index num_linear = 0;  // full linear dimension
  std::vector<Block> blocks;  // smooths then spatial
  std::vector<SplineBasis> bases;
  std::vector<Station> knots;
  double theta = 1.0;
  std::vector<std::string> dropped;
};

struct Eval {
  std::vector<double> lambda;
  Eigen::VectorXd coef;
  double rss = 0.0, penalty = 0.0, edf = 0.0, gcv = 0.0;
  Eigen::VectorXd block_edf;
  Eigen::MatrixXd r2;  // A = r2' r2
};

Block make_block(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& penalty, Index offset) {
  const Index k = raw.cols();
  // Sum-to-zero over the training rows: null space of the column sums.
  const Eigen::VectorXd c = raw.colwise().sum().transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
  Block b;
  b.offset = offset;
  b.size = k - 1;
  b.z = q.rightCols(k - 1);
  b.penalty = b.z.transpose() * penalty * b.z;
  b.penalty = 0.5 * (b.penalty + b.penalty.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.penalty);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(ev.maxCoeff(), 0.0);
  std::vector<Index> keep;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-12 * top) keep.push_back(i);
  b.root.resize(static_cast<Index>(keep.size()), b.size);
  for (std::size_t r = 0; r < keep.size(); ++r)
    b.root.row(static_cast<Index>(r)) = std::sqrt(ev(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
  return b;
}

Problem build_problem(const Dataset& ds, const ModelSpec& spec, const GammOptions& opt, std::optional<double> theta) {
  spec.validate(ds);
  if (spec.covariates().empty()) throw Error(ErrorCode::InvalidSpec, "GAMM needs at least one term");
  const DesignMatrix dm = design_matrix(ds, spec);
  const std::size_t n = ds.num_stations(), T = ds.num_days();
  const auto nlin = static_cast<Index>(dm.labels.size() - spec.smooth_terms.size());

  std::vector<Index> rows;
  std::vector<Index> row_of(n * T, -1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t r = dm.row(i, t);
      if (dm.observed[r] && dm.x.row(static_cast<Index>(r)).allFinite()) {
        row_of[r] = static_cast<Index>(rows.size());
        rows.push_back(static_cast<Index>(r));
      }
    }
  const auto N = static_cast<Index>(rows.size());

  Problem P;
  P.num_linear = nlin;
  P.prev.assign(rows.size(), -1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 1; t < T; ++t) {
      const Index cur = row_of[dm.row(i, t)];
      if (cur >= 0) P.prev[static_cast<std::size_t>(cur)] = row_of[dm.row(i, t - 1)];
    }

  for (Index c = 0; c < nlin; ++c) {
    bool nonzero = false;
    for (Index r : rows) nonzero = nonzero || dm.x(r, c) != 0.0;
    if (nonzero)
      P.active_linear.push_back(c);
    else
      P.dropped.push_back(dm.labels[static_cast<std::size_t>(c)]);
  }
  Eigen::MatrixXd lin(N, static_cast<Index>(P.active_linear.size()));
  for (Index a = 0; a < N; ++a)
    for (std::size_t c = 0; c < P.active_linear.size(); ++c)
      lin(a, static_cast<Index>(c)) = dm.x(rows[static_cast<std::size_t>(a)], P.active_linear[c]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> lin_qr(lin);
  if (lin_qr.rank() < lin.cols()) throw Error(ErrorCode::RankDeficientDesign, "linear terms are collinear");

  std::vector<Eigen::MatrixXd> parts = {lin};
  Index offset = lin.cols();
  for (std::size_t j = 0; j < spec.smooth_terms.size(); ++j) {
    Eigen::VectorXd v(N);
    for (Index a = 0; a < N; ++a) v(a) = dm.x(rows[static_cast<std::size_t>(a)], nlin + static_cast<Index>(j));
    CubicBasis cb = cubic_basis(v, opt.knots, spec.smooth_terms[j]);
    P.blocks.push_back(make_block(cb.matrix, cb.basis.penalty, offset));
    parts.push_back(cb.matrix * P.blocks.back().z);
    offset += P.blocks.back().size;
    P.bases.push_back(std::move(cb.basis));
  }
  if (opt.spatial && n >= 2) {
    P.knots.assign(ds.stations().begin(), ds.stations().end());
    P.theta = theta.value_or(max_distance_range(P.knots));
    const Eigen::MatrixXd per_station = spatial_basis(ds.stations(), P.knots, P.theta);
    Eigen::MatrixXd raw(N, per_station.cols());
    for (Index a = 0; a < N; ++a)
      raw.row(a) = per_station.row(static_cast<Index>(static_cast<std::size_t>(rows[static_cast<std::size_t>(a)]) / T));
    P.blocks.push_back(make_block(raw, spatial_penalty(P.knots, P.theta), offset));
    parts.push_back(raw * P.blocks.back().z);
    offset += P.blocks.back().size;
  }
  if (N < offset + 10)
    throw Error(ErrorCode::InsufficientData,
                std::to_string(N) + " usable rows for " + std::to_string(offset) + " coefficients");
  P.x.resize(N, offset);
  Index col = 0;
  for (const auto& part : parts) {
    P.x.middleCols(col, part.cols()) = part;
    col += part.cols();
  }
  P.z.resize(N);
  for (Index a = 0; a < N; ++a) {
    const auto r = static_cast<std::size_t>(rows[static_cast<std::size_t>(a)]);
    P.z(a) = ds.response()(static_cast<Index>(r / T), static_cast<Index>(r % T));
  }
  for (auto& b : P.blocks) {
    const double tp = b.penalty.trace();
    const double tx = P.x.middleCols(b.offset, b.size).squaredNorm();
    b.scale = tp > 0.0 && tx > 0.0 ? tx / tp : 1.0;
  }
  return P;
}

/// Rows become x_t - g x_{t-1} where the previous day is usable, sqrt(1 - g^2) x_t otherwise.
void quasi_difference(const Problem& P, double g, Eigen::MatrixXd& xd, Eigen::VectorXd& zd) {
  xd.resize(P.x.rows(), P.x.cols());
  zd.resize(P.z.size());
  const double head = std::sqrt(1.0 - g * g);
  for (Index a = 0; a < P.x.rows(); ++a) {
    const Index p = P.prev[static_cast<std::size_t>(a)];
    if (p >= 0) {
      xd.row(a) = P.x.row(a) - g * P.x.row(p);
      zd(a) = P.z(a) - g * P.z(p);
    } else {
      xd.row(a) = head * P.x.row(a);
      zd(a) = head * P.z(a);
    }
  }
}

/// Penalised least squares through the QR factor of the design, so that huge
/// smoothing parameters stay well conditioned.
class Solver {
 public:
  Solver(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const std::vector<Block>& blocks)
      : blocks_(blocks), n_(static_cast<double>(x.rows())), p_(x.cols()) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    r_ = qr.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qtz = qr.householderQ().adjoint() * z;
    f_ = qtz.head(p_);
    rss0_ = qtz.tail(x.rows() - p_).squaredNorm();
    zz_ = z.squaredNorm();
  }

  [[nodiscard]] Eval evaluate(const std::vector<double>& lambda) const {
    Index extra = 0;
    for (const auto& b : blocks_) extra += b.root.rows();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p_ + extra, p_);
    m.topRows(p_) = r_;
    Index row = p_;
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      const auto& b = blocks_[j];
      m.block(row, b.offset, b.root.rows(), b.size) = std::sqrt(lambda[j]) * b.root;
      row += b.root.rows();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.rows());
    rhs.head(p_) = f_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    const Eigen::VectorXd qtr = qr.householderQ().adjoint() * rhs;
    Eval e;
    e.lambda = lambda;
    e.r2 = qr.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
    e.coef = e.r2.triangularView<Eigen::Upper>().solve(qtr.head(p_));
    e.rss = rss0_ + (f_ - r_ * e.coef).squaredNorm();
    // An exact fit leaves only rounding noise, which must not drive the search.
    if (e.rss <= 1e-20 * zz_) e.rss = 0.0;
    for (std::size_t j = 0; j < blocks_.size(); ++j)
      e.penalty += lambda[j] * (blocks_[j].root * e.coef.segment(blocks_[j].offset, blocks_[j].size)).squaredNorm();
    // Influence matrix trace: tr(A^-1 R'R) with A = r2' r2.
    const Eigen::MatrixXd wt = e.r2.transpose().triangularView<Eigen::Lower>().solve(r_.transpose());
    const Eigen::MatrixXd v = e.r2.triangularView<Eigen::Upper>().solve(wt);
    const Eigen::VectorXd diag = (v.array() * r_.transpose().array()).rowwise().sum();
    e.edf = diag.sum();
    e.block_edf.resize(static_cast<Index>(blocks_.size()));
    for (std::size_t j = 0; j < blocks_.size(); ++j)
      e.block_edf(static_cast<Index>(j)) = diag.segment(blocks_[j].offset, blocks_[j].size).sum();
    const double dof = n_ - e.edf;
    e.gcv = dof > 0.0 ? n_ * e.rss / (dof * dof) : std::numeric_limits<double>::infinity();
    return e;
  }

 private:
  const std::vector<Block>& blocks_;
  double n_;
  Index p_;
  Eigen::MatrixXd r_;
  Eigen::VectorXd f_;
  double rss0_ = 0.0, zz_ = 0.0;
};

struct PassResult {
  Eval eval;
  std::vector<double> gcv_trace, objective_trace;
};

PassResult penalised_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Problem& P,
                         std::vector<double>& lambda, const GammOptions& opt) {
  const Solver solver(x, z, P.blocks);
  PassResult out;
  if (opt.fixed_lambda) {
    std::fill(lambda.begin(), lambda.end(), *opt.fixed_lambda);
    out.eval = solver.evaluate(lambda);
    out.gcv_trace.push_back(out.eval.gcv);
    out.objective_trace.push_back(out.eval.rss + out.eval.penalty);
    return out;
  }
  std::vector<double> grid;
  for (double e = opt.log10_lambda_min; e <= opt.log10_lambda_max + 1e-9; e += opt.log10_lambda_step)
    grid.push_back(std::pow(10.0, e));
  Eval best = solver.evaluate(lambda);
  out.gcv_trace.push_back(best.gcv);
  out.objective_trace.push_back(best.rss + best.penalty);
  for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
    for (std::size_t j = 0; j < P.blocks.size(); ++j) {
      std::vector<Eval> trial(grid.size());
      parallel_for(grid.size(), opt.threads, [&](std::size_t k) {
        std::vector<double> l = lambda;
        l[j] = P.blocks[j].scale * grid[k];
        trial[k] = solver.evaluate(l);
      });
      // Ascending grid with <=: exact ties go to the smoother fit.
      for (auto& e : trial)
        if (e.gcv <= best.gcv) best = std::move(e);
      lambda = best.lambda;
      out.gcv_trace.push_back(best.gcv);
      out.objective_trace.push_back(best.rss + best.penalty);
    }
  }
  out.eval = std::move(best);
  return out;
}

/// Pooled lag-1 regression of the working residuals within stations.
double ar1_coefficient(const Problem& P, const Eigen::VectorXd& coef) {
  const Eigen::VectorXd r = P.z - P.x * coef;
  if (r.squaredNorm() <= 1e-20 * P.z.squaredNorm()) return 0.0;
  double num = 0.0, den = 0.0;
  for (Index a = 0; a < r.size(); ++a) {
    const Index p = P.prev[static_cast<std::size_t>(a)];
    if (p < 0) continue;
    num += r(a) * r(p);
    den += r(p) * r(p);
  }
  if (!(den > 0.0)) return 0.0;
  return std::clamp(num / den, -0.99, 0.99);
}

GammFit assemble(const Problem& P, const ModelSpec& spec, const PassResult& pass, double g, int iterations,
                 bool converged) {
  const Eval& e = pass.eval;
  GammFit fit;
  fit.spec = spec;
  fit.linear_labels = design_labels(spec);
  fit.linear_labels.resize(static_cast<std::size_t>(P.num_linear));
  fit.dropped_columns = P.dropped;
  fit.theta_gamm = P.theta;
  fit.g_gamm = g;
  fit.num_rows = static_cast<std::size_t>(P.x.rows());
  fit.iterations = iterations;
  fit.converged = converged;
  fit.gcv = e.gcv;
  fit.edf_total = e.edf;
  fit.gcv_trace = pass.gcv_trace;
  fit.objective_trace = pass.objective_trace;
  const double dof = static_cast<double>(P.x.rows()) - e.edf;
  fit.sigma2 = dof > 0.0 ? e.rss / dof : 0.0;

  // Map from constrained coefficients to the reported parametrisation.
  Index full = P.num_linear;
  for (const auto& b : P.bases) full += b.size();
  if (!P.knots.empty()) full += static_cast<Index>(P.knots.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(full, P.x.cols());
  for (std::size_t a = 0; a < P.active_linear.size(); ++a) t(P.active_linear[a], static_cast<Index>(a)) = 1.0;
  Index row = P.num_linear;
  for (const auto& b : P.blocks) {
    t.block(row, b.offset, b.z.rows(), b.size) = b.z;
    row += b.z.rows();
  }
  const Eigen::VectorXd coef = t * e.coef;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(P.x.cols(), P.x.cols());
  const Eigen::MatrixXd rinv = e.r2.triangularView<Eigen::Upper>().solve(eye);
  fit.covariance = fit.sigma2 * t * (rinv * rinv.transpose()) * t.transpose();

  fit.beta_linear = coef.head(P.num_linear);
  row = P.num_linear;
  for (std::size_t j = 0; j < P.bases.size(); ++j) {
    SmoothTerm s;
    s.basis = P.bases[j];
    s.coefs = coef.segment(row, s.basis.size());
    s.lambda = e.lambda[j];
    s.edf = e.block_edf(static_cast<Index>(j));
    row += s.basis.size();
    fit.smooths.push_back(std::move(s));
  }
  if (!P.knots.empty()) {
    fit.spatial_knots = P.knots;
    fit.spatial_coefs = coef.segment(row, static_cast<Index>(P.knots.size()));
    fit.spatial_lambda = e.lambda.back();
    fit.spatial_edf = e.block_edf(e.block_edf.size() - 1);
  }
  return fit;
}

GammFit fit_with_theta(const Dataset& ds, const ModelSpec& spec, const GammOptions& opt, std::optional<double> theta) {
  const Problem P = build_problem(ds, spec, opt, theta);
  std::vector<double> lambda;
  for (const auto& b : P.blocks) lambda.push_back(b.scale);

  if (!opt.estimate_ar && !opt.fixed_g) {
    const PassResult pass = penalised_fit(P.x, P.z, P, lambda, opt);
    return assemble(P, spec, pass, 0.0, 1, true);
  }
  Eigen::MatrixXd xd;
  Eigen::VectorXd zd;
  if (opt.fixed_g) {
    if (!(std::abs(*opt.fixed_g) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|g| must be < 1");
    quasi_difference(P, *opt.fixed_g, xd, zd);
    const PassResult pass = penalised_fit(xd, zd, P, lambda, opt);
    return assemble(P, spec, pass, *opt.fixed_g, 1, true);
  }
  double g = 0.0;
  double deviance = 0.0;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    quasi_difference(P, g, xd, zd);
    const PassResult pass = penalised_fit(xd, zd, P, lambda, opt);
    const double g_new = ar1_coefficient(P, pass.eval.coef);
    const double dev = pass.eval.rss;
    const bool done = iter > 1 && std::abs(g_new - g) < opt.tol &&
                      std::abs(dev - deviance) <= opt.tol * std::max(deviance, 1e-300);
    if (done || iter == opt.max_iter) {
      if (!done) throw Error(ErrorCode::NoConvergence, "AR(1) iteration did not settle");
      return assemble(P, spec, pass, g, iter, true);
    }
    g = g_new;
    deviance = dev;
  }
  throw Error(ErrorCode::NoConvergence, "max_iter must be >= 1");
}

}  // namespace

double GammFit::smooth_value(std::size_t j, double x) const { return smooths.at(j).basis.row(x).dot(smooths[j].coefs); }

double GammFit::large_scale(const Eigen::VectorXd& x) const {
  const Index nlin = beta_linear.size();
  if (x.size() != nlin + static_cast<Index>(smooths.size()) || !x.allFinite())
    throw Error(ErrorCode::MissingTargetCovariate, "design row does not match the GAMM terms");
  double s = x.head(nlin).dot(beta_linear);
  for (std::size_t j = 0; j < smooths.size(); ++j) s += smooth_value(j, x(nlin + static_cast<Index>(j)));
  return s;
}

double GammFit::spatial_effect(const Station& s) const {
  if (spatial_knots.empty()) return 0.0;
  return spatial_basis(std::span<const Station>(&s, 1), spatial_knots, theta_gamm).row(0).dot(spatial_coefs);
}

Eigen::VectorXd GammFit::linear_standard_errors() const {
  Eigen::VectorXd se(beta_linear.size());
  for (Index c = 0; c < se.size(); ++c) {
    const bool dropped = std::find(dropped_columns.begin(), dropped_columns.end(),
                                   linear_labels[static_cast<std::size_t>(c)]) != dropped_columns.end();
    se(c) = dropped ? kNaN : std::sqrt(std::max(covariance(c, c), 0.0));
  }
  return se;
}

GammFit fit_gamm(const Dataset& ds, const ModelSpec& spec, const GammOptions& options) {
  if (!options.profile_theta || !options.spatial) return fit_with_theta(ds, spec, options, options.theta);
  const double base = options.theta.value_or(max_distance_range(ds.stations()));
  std::optional<GammFit> best;
  for (double factor : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    GammFit f = fit_with_theta(ds, spec, options, base * factor);
    if (!best || f.gcv < best->gcv) best = std::move(f);
  }
  return *best;
}

std::vector<Prediction> predict_gamm(const GammFit& fit, std::span<const PredictionTarget> targets) {
  std::vector<Prediction> out;
  out.reserve(targets.size());
  const Station* cached = nullptr;
  double c = 0.0;
  const double g = fit.g_gamm;
  for (const auto& target : targets) {
    if (cached == nullptr || !(*cached == target.station)) {
      c = fit.spatial_effect(target.station);
      cached = &target.station;
    }
    Prediction p;
    const double s = fit.large_scale(target.x);
    p.mean = s + c;
    p.variance = fit.sigma2 / (1.0 - g * g);
    if (g != 0.0 && std::isfinite(target.previous_response) && target.previous_x.size() == target.x.size() &&
        target.previous_x.allFinite()) {
      p.mean += g * (target.previous_response - fit.large_scale(target.previous_x) - c);
      p.variance = fit.sigma2;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<CurvePoint> smooth_curve(const GammFit& fit, std::string_view covariate, int grid_size) {
  if (grid_size < 2) throw Error(ErrorCode::InvalidArgument, "grid_size must be >= 2");
  Index offset = fit.beta_linear.size();
  for (std::size_t j = 0; j < fit.smooths.size(); ++j) {
    const auto& s = fit.smooths[j];
    if (s.basis.covariate != covariate) {
      offset += s.basis.size();
      continue;
    }
    const Eigen::MatrixXd v = fit.covariance.block(offset, offset, s.basis.size(), s.basis.size());
    const double lo = s.basis.knots(0), hi = s.basis.knots(s.basis.size() - 1);
    std::vector<CurvePoint> out;
    for (int k = 0; k < grid_size; ++k) {
      const double x = lo + (hi - lo) * k / (grid_size - 1);
      const Eigen::RowVectorXd b = s.basis.row(x);
      const double se = std::sqrt(std::max((b * v * b.transpose())(0, 0), 0.0));
      const double f = b.dot(s.coefs);
      out.push_back({x, f, f - 1.96 * se, f + 1.96 * se});
    }
    return out;
  }
  throw Error(ErrorCode::UnknownVariable, std::string(covariate) + " is not a smooth term");
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const GammFit& fit) {
  nlohmann::json j;
  j["spec"] = pmst::to_json(fit.spec);
  j["linear_labels"] = fit.linear_labels;
  j["beta_linear"] = to_vec(fit.beta_linear);
  auto smooths = nlohmann::json::array();
  for (const auto& s : fit.smooths)
    smooths.push_back({{"covariate", s.basis.covariate},
                       {"knots", to_vec(s.basis.knots)},
                       {"coefs", to_vec(s.coefs)},
                       {"lambda", s.lambda},
                       {"edf", s.edf}});
  j["smooths"] = smooths;
  j["spatial_knots"] = stations_to_json(fit.spatial_knots);
  j["spatial_coefs"] = to_vec(fit.spatial_coefs);
  j["spatial_lambda"] = fit.spatial_lambda;
  j["spatial_edf"] = fit.spatial_edf;
  j["theta"] = fit.theta_gamm;
  j["g"] = fit.g_gamm;
  j["sigma2"] = fit.sigma2;
  j["gcv"] = fit.gcv;
  j["edf_total"] = fit.edf_total;
  j["num_rows"] = fit.num_rows;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["dropped_columns"] = fit.dropped_columns;
  auto cov = nlohmann::json::array();
  for (Index r = 0; r < fit.covariance.rows(); ++r) cov.push_back(to_vec(fit.covariance.row(r).transpose()));
  j["covariance"] = cov;
  return j;
}

GammFit fit_from_json(const nlohmann::json& j) {
  GammFit fit;
  fit.spec = spec_from_json(j.at("spec"));
  fit.linear_labels = j.at("linear_labels").get<std::vector<std::string>>();
  fit.beta_linear = from_vec(j.at("beta_linear").get<std::vector<double>>());
  for (const auto& s : j.at("smooths")) {
    SmoothTerm t;
    t.basis = SplineBasis::from_knots(s.at("covariate").get<std::string>(),
                                      from_vec(s.at("knots").get<std::vector<double>>()));
    t.coefs = from_vec(s.at("coefs").get<std::vector<double>>());
    t.lambda = s.at("lambda").get<double>();
    t.edf = s.at("edf").get<double>();
    fit.smooths.push_back(std::move(t));
  }
  fit.spatial_knots = stations_from_json(j.at("spatial_knots"));
  fit.spatial_coefs = from_vec(j.at("spatial_coefs").get<std::vector<double>>());
  fit.spatial_lambda = j.value("spatial_lambda", 0.0);
  fit.spatial_edf = j.value("spatial_edf", 0.0);
  fit.theta_gamm = j.at("theta").get<double>();
  fit.g_gamm = j.at("g").get<double>();
  fit.sigma2 = j.at("sigma2").get<double>();
  fit.gcv = j.value("gcv", 0.0);
  fit.edf_total = j.value("edf_total", 0.0);
  fit.num_rows = j.value("num_rows", std::size_t{0});
  fit.iterations = j.value("iterations", 0);
  fit.converged = j.value("converged", true);
  fit.dropped_columns = j.value("dropped_columns", std::vector<std::string>{});
  const auto& cov = j.at("covariance");
  const auto dim = static_cast<Index>(cov.size());
  fit.covariance.resize(dim, dim);
  for (Index r = 0; r < dim; ++r) fit.covariance.row(r) = from_vec(cov[static_cast<std::size_t>(r)].get<std::vector<double>>());
  if (!(std::abs(fit.g_gamm) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|g| must be < 1");
  return fit;
}

}  // namespace pmst::gamm
