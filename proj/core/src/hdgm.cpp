#include "pmst/hdgm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pmst/error.hpp"
#include "pmst/kernels.hpp"
#include "pmst/optim.hpp"

namespace pmst::hdgm {

void HdgmParams::validate() const {
  if (!(std::abs(g) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|g| must be < 1");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw Error(ErrorCode::InvalidArgument, "theta must be > 0");
  if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "v must be >= 0");
  if (!(sigma2_eps > 0.0) || !std::isfinite(sigma2_eps))
    throw Error(ErrorCode::InvalidArgument, "sigma2_eps must be > 0");
  if (!beta.allFinite()) throw Error(ErrorCode::InvalidArgument, "beta must be finite");
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

using Index = Eigen::Index;

/// Observation layout shared by filtering, EM and GLS.
struct Layout {
  std::size_t n = 0, T = 0;
  std::vector<std::vector<Index>> obs;  // usable station indices per day
  std::size_t total = 0;
};

Layout make_layout(const Dataset& ds, const DesignMatrix& dm) {
  Layout L;
  L.n = ds.num_stations();
  L.T = ds.num_days();
  L.obs.resize(L.T);
  for (std::size_t t = 0; t < L.T; ++t)
    for (std::size_t i = 0; i < L.n; ++i) {
      const auto r = static_cast<Index>(dm.row(i, t));
      if (dm.observed[static_cast<std::size_t>(r)] && dm.x.row(r).allFinite()) {
        L.obs[t].push_back(static_cast<Index>(i));
        ++L.total;
      }
    }
  return L;
}

/// Residual of the observed response from the regression mean; NaN where unused.
Eigen::MatrixXd residuals(const Dataset& ds, const DesignMatrix& dm, const Layout& L, const Eigen::VectorXd& beta) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(static_cast<Index>(L.n), static_cast<Index>(L.T), kNaN);
  for (std::size_t t = 0; t < L.T; ++t)
    for (Index i : L.obs[t]) {
      const auto row = static_cast<Index>(dm.row(static_cast<std::size_t>(i), t));
      r(i, static_cast<Index>(t)) = ds.response()(i, static_cast<Index>(t)) - dm.x.row(row).dot(beta);
    }
  return r;
}

Eigen::MatrixXd take(const Eigen::MatrixXd& m, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(static_cast<Index>(a), static_cast<Index>(b)) = m(rows[a], cols[b]);
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Index>& rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t a = 0; a < rows.size(); ++a) out.row(static_cast<Index>(a)) = m.row(rows[a]);
  return out;
}

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

Eigen::MatrixXd gamma_matrix(const Dataset& ds, double theta, double jitter) {
  return corr_matrix(ds.stations(), ExpCorrParams{theta}, jitter);
}

KalmanResult run_filter(const Dataset& ds, const DesignMatrix& dm, const Layout& L, const HdgmParams& p,
                        const KalmanOptions& options) {
  p.validate();
  if (p.beta.size() != dm.x.cols()) throw Error(ErrorCode::InvalidArgument, "beta length does not match design");
  if (L.total == 0) throw Error(ErrorCode::AllMissing, "no usable observations");
  const auto n = static_cast<Index>(L.n);
  const auto T = static_cast<Index>(L.T);
  const Eigen::MatrixXd gamma = gamma_matrix(ds, p.theta, options.jitter);
  checked_llt(gamma, "innovation covariance");
  const Eigen::MatrixXd resid = residuals(ds, dm, L, p.beta);
  const double g = p.g, v = p.v, s2 = p.sigma2_eps;

  Eigen::MatrixXd filt_mean(n, T);
  std::vector<Eigen::MatrixXd> filt_cov(static_cast<std::size_t>(T));
  KalmanResult out;
  double ll = 0.0;
  Eigen::VectorXd m_prev = Eigen::VectorXd::Zero(n);
  for (Index t = 0; t < T; ++t) {
    Eigen::VectorXd m_pred;
    Eigen::MatrixXd p_pred;
    if (t == 0) {
      m_pred = Eigen::VectorXd::Zero(n);
      p_pred = gamma / (1.0 - g * g);
    } else {
      m_pred = g * m_prev;
      p_pred = g * g * filt_cov[static_cast<std::size_t>(t - 1)] + gamma;
    }
    const auto& o = L.obs[static_cast<std::size_t>(t)];
    if (o.empty()) {
      filt_mean.col(t) = m_pred;
      filt_cov[static_cast<std::size_t>(t)] = std::move(p_pred);
    } else {
      const auto k = static_cast<Index>(o.size());
      Eigen::VectorXd e(k);
      for (Index a = 0; a < k; ++a) e(a) = resid(o[static_cast<std::size_t>(a)], t) - v * m_pred(o[static_cast<std::size_t>(a)]);
      const Eigen::MatrixXd p_on = take_rows(p_pred, o);  // k x n
      Eigen::MatrixXd s(k, k);
      for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) s(a, b) = v * v * p_on(a, o[static_cast<std::size_t>(b)]);
      s.diagonal().array() += s2;
      const auto llt = checked_llt(s, "innovation covariance of observations");
      const Eigen::VectorXd se = llt.solve(e);
      ll += -0.5 * (static_cast<double>(k) * kLog2Pi + log_det(llt) + e.dot(se));
      const Eigen::MatrixXd w = llt.solve(v * p_on);  // S^{-1} v P_{O,:}
      filt_mean.col(t) = m_pred + w.transpose() * e;
      Eigen::MatrixXd pf = p_pred - v * p_on.transpose() * w;
      symmetrize(pf);
      filt_cov[static_cast<std::size_t>(t)] = std::move(pf);
    }
    m_prev = filt_mean.col(t);
  }
  out.loglik = ll;
  if (!options.smooth) return out;

  // Rauch-Tung-Striebel pass with lag-one cross-covariances.
  SmoothedState& sm = out.smoothed;
  sm.mean.resize(n, T);
  sm.variance.resize(n, T);
  sm.lag1_cov = Eigen::MatrixXd::Constant(n, T, kNaN);
  StateMoments& mom = out.moments;
  mom.num_days = L.T;
  mom.s11 = Eigen::MatrixXd::Zero(n, n);
  mom.s00 = Eigen::MatrixXd::Zero(n, n);
  mom.s10 = Eigen::MatrixXd::Zero(n, n);
  if (options.keep_covariances) out.smoothed_cov.resize(static_cast<std::size_t>(T));

  Eigen::VectorXd ms_next = filt_mean.col(T - 1);
  Eigen::MatrixXd ps_next = filt_cov[static_cast<std::size_t>(T - 1)];
  sm.mean.col(T - 1) = ms_next;
  sm.variance.col(T - 1) = ps_next.diagonal();
  if (options.keep_covariances) out.smoothed_cov[static_cast<std::size_t>(T - 1)] = ps_next;
  for (Index t = T - 2; t >= 0; --t) {
    const Eigen::MatrixXd& pf = filt_cov[static_cast<std::size_t>(t)];
    const Eigen::VectorXd mf = filt_mean.col(t);
    const Eigen::MatrixXd p_pred = g * g * pf + gamma;
    const auto llt = checked_llt(p_pred, "predicted state covariance");
    // J = g P_t P_pred^{-1}; both symmetric so J' = P_pred^{-1} (g P_t).
    const Eigen::MatrixXd jt = llt.solve(g * pf);
    const Eigen::MatrixXd j = jt.transpose();
    const Eigen::VectorXd ms = mf + j * (ms_next - g * mf);
    Eigen::MatrixXd ps = pf + j * (ps_next - p_pred) * jt;
    symmetrize(ps);
    const Eigen::MatrixXd cross = ps_next * jt;  // Cov(xi_{t+1}, xi_t | Y)
    mom.s11 += ps_next + ms_next * ms_next.transpose();
    mom.s00 += ps + ms * ms.transpose();
    mom.s10 += cross + ms_next * ms.transpose();
    sm.lag1_cov.col(t + 1) = cross.diagonal();
    sm.mean.col(t) = ms;
    sm.variance.col(t) = ps.diagonal();
    if (options.keep_covariances) out.smoothed_cov[static_cast<std::size_t>(t)] = ps;
    ms_next = ms;
    ps_next = std::move(ps);
  }
  mom.first = ps_next + ms_next * ms_next.transpose();
  return out;
}

/// Columns that are not identically zero on usable rows.
std::vector<Index> active_columns(const DesignMatrix& dm, const Layout& L) {
  std::vector<Index> active;
  for (Index c = 0; c < dm.x.cols(); ++c) {
    bool nonzero = false;
    for (std::size_t t = 0; t < L.T && !nonzero; ++t)
      for (Index i : L.obs[t])
        if (dm.x(static_cast<Index>(dm.row(static_cast<std::size_t>(i), t)), c) != 0.0) {
          nonzero = true;
          break;
        }
    if (nonzero) active.push_back(c);
  }
  return active;
}

double state_objective(double g, double a, double b, double c, double d, double n) {
  return 0.5 * n * std::log(1.0 - g * g) - 0.5 * ((1.0 - g * g) * a + b - 2.0 * g * c + g * g * d);
}

/// Maximiser of a 1-D function on [lo, hi]: coarse grid, then golden section
/// around the best grid point. Returns `current` unless something beats it.
double maximise_1d(const std::function<double(double)>& f, double lo, double hi, double current, int grid = 40) {
  double best_x = current;
  double best_f = f(current);
  if (!std::isfinite(best_f)) best_f = -std::numeric_limits<double>::infinity();
  double grid_x = lo, grid_f = -std::numeric_limits<double>::infinity();
  const double step = (hi - lo) / grid;
  for (int k = 0; k <= grid; ++k) {
    const double x = lo + step * k;
    const double fx = f(x);
    if (std::isfinite(fx) && fx > grid_f) grid_f = fx, grid_x = x;
  }
  const double a = std::max(lo, grid_x - step), b = std::min(hi, grid_x + step);
  const double xr = golden_section_max(
      [&](double x) {
        const double fx = f(x);
        return std::isfinite(fx) ? fx : -std::numeric_limits<double>::infinity();
      },
      a, b, 1e-10 * std::max(1.0, std::abs(hi - lo)));
  for (double x : {grid_x, xr}) {
    const double fx = f(x);
    if (std::isfinite(fx) && fx > best_f) best_f = fx, best_x = x;
  }
  return best_x;
}

}  // namespace

KalmanResult kalman_loglik(const Dataset& ds, const DesignMatrix& design, const HdgmParams& p,
                           const KalmanOptions& options) {
  const Layout L = make_layout(ds, design);
  return run_filter(ds, design, L, p, options);
}

KalmanResult kalman_loglik(const Dataset& ds, const ModelSpec& spec, const HdgmParams& p, const KalmanOptions& options) {
  return kalman_loglik(ds, design_matrix(ds, spec), p, options);
}

HdgmParams default_init(const Dataset& ds, const ModelSpec& spec) {
  const DesignMatrix dm = design_matrix(ds, spec);
  const Layout L = make_layout(ds, dm);
  if (L.total == 0) throw Error(ErrorCode::AllMissing, "no usable observations");
  const std::vector<Index> active = active_columns(dm, L);
  const auto p = static_cast<Index>(active.size());
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
  for (std::size_t t = 0; t < L.T; ++t)
    for (Index i : L.obs[t]) {
      const auto r = static_cast<Index>(dm.row(static_cast<std::size_t>(i), t));
      Eigen::VectorXd x(p);
      for (Index c = 0; c < p; ++c) x(c) = dm.x(r, active[static_cast<std::size_t>(c)]);
      xtx.noalias() += x * x.transpose();
      xty += x * ds.response()(i, static_cast<Index>(t));
    }
  const Eigen::VectorXd b = xtx.ldlt().solve(xty);
  HdgmParams init;
  init.beta = Eigen::VectorXd::Zero(dm.x.cols());
  for (Index c = 0; c < p; ++c) init.beta(active[static_cast<std::size_t>(c)]) = b(c);
  const Eigen::MatrixXd r = residuals(ds, dm, L, init.beta);
  double ss = 0.0;
  for (std::size_t t = 0; t < L.T; ++t)
    for (Index i : L.obs[t]) ss += r(i, static_cast<Index>(t)) * r(i, static_cast<Index>(t));
  const double var = std::max(ss / static_cast<double>(L.total), 1e-6);
  init.g = 0.5;
  init.v = std::sqrt(0.5 * var);
  init.sigma2_eps = 0.5 * var;
  std::vector<double> d;
  const Eigen::MatrixXd dist = distance_matrix(ds.stations());
  for (Index i = 0; i < dist.rows(); ++i)
    for (Index j = i + 1; j < dist.cols(); ++j) d.push_back(dist(i, j));
  if (d.empty()) {
    init.theta = 1.0;
  } else {
    std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
    init.theta = std::max(d[d.size() / 2], 0.01);
  }
  return init;
}

EmResult em_fit(const Dataset& ds, const ModelSpec& spec, const HdgmParams& init, const EmOptions& options) {
  init.validate();
  const DesignMatrix dm = design_matrix(ds, spec);
  const Layout L = make_layout(ds, dm);
  if (L.total == 0) throw Error(ErrorCode::AllMissing, "no usable observations");
  const std::vector<Index> active = active_columns(dm, L);
  const auto pa = static_cast<Index>(active.size());
  const auto n = static_cast<Index>(L.n);
  const double N = static_cast<double>(L.total);

  EmResult result;
  result.labels = dm.labels;
  for (Index c = 0, k = 0; c < dm.x.cols(); ++c) {
    if (k < pa && active[static_cast<std::size_t>(k)] == c) {
      ++k;
      continue;
    }
    result.dropped_columns.push_back(dm.labels[static_cast<std::size_t>(c)]);
  }

  // Observed rows restricted to active columns, reused by every M-step.
  Eigen::MatrixXd xa(static_cast<Index>(L.total), pa);
  Eigen::VectorXd ya(static_cast<Index>(L.total));
  std::vector<std::pair<Index, Index>> cell(L.total);
  {
    Index r = 0;
    for (std::size_t t = 0; t < L.T; ++t)
      for (Index i : L.obs[t]) {
        const auto row = static_cast<Index>(dm.row(static_cast<std::size_t>(i), t));
        for (Index c = 0; c < pa; ++c) xa(r, c) = dm.x(row, active[static_cast<std::size_t>(c)]);
        ya(r) = ds.response()(i, static_cast<Index>(t));
        cell[static_cast<std::size_t>(r)] = {i, static_cast<Index>(t)};
        ++r;
      }
  }
  const Eigen::MatrixXd xtx = xa.transpose() * xa;
  const Eigen::VectorXd xty = xa.transpose() * ya;
  const Eigen::MatrixXd dist = distance_matrix(ds.stations());
  const double var_floor = 1e-12 * std::max(1.0, ya.squaredNorm() / N);

  HdgmParams p = init;
  for (Index c = 0; c < dm.x.cols(); ++c)
    if (std::find(active.begin(), active.end(), c) == active.end()) p.beta(c) = 0.0;

  for (int it = 0; it < options.max_iter; ++it) {
    const KalmanResult e = run_filter(ds, dm, L, p, {});
    result.loglik_trace.push_back(e.loglik);
    result.iterations = it + 1;
    if (it > 0) {
      const double prev = result.loglik_trace[result.loglik_trace.size() - 2];
      if (std::abs(e.loglik - prev) < options.tol * std::abs(prev)) {
        result.converged = true;
        break;
      }
    }
    if (it + 1 == options.max_iter) break;

    // (beta, v) jointly, then sigma2_eps.
    Eigen::VectorXd m(static_cast<Index>(L.total)), q(static_cast<Index>(L.total));
    for (std::size_t r = 0; r < L.total; ++r) {
      const auto [i, t] = cell[r];
      m(static_cast<Index>(r)) = e.smoothed.mean(i, t);
      q(static_cast<Index>(r)) = e.smoothed.variance(i, t);
    }
    Eigen::MatrixXd a(pa + 1, pa + 1);
    a.topLeftCorner(pa, pa) = xtx;
    a.topRightCorner(pa, 1) = xa.transpose() * m;
    a.bottomLeftCorner(1, pa) = a.topRightCorner(pa, 1).transpose();
    a(pa, pa) = m.squaredNorm() + q.sum();
    Eigen::VectorXd b(pa + 1);
    b.head(pa) = xty;
    b(pa) = m.dot(ya);
    const Eigen::VectorXd sol = a.ldlt().solve(b);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(dm.x.cols());
    for (Index c = 0; c < pa; ++c) beta(active[static_cast<std::size_t>(c)]) = sol(c);
    const double v_new = sol(pa);
    const Eigen::VectorXd fit_resid = ya - xa * sol.head(pa) - v_new * m;
    const double s2 = (fit_resid.squaredNorm() + v_new * v_new * q.sum()) / N;
    // The marginal likelihood is invariant to the sign of v.
    p.beta = beta;
    p.v = std::abs(v_new);
    p.sigma2_eps = std::max(s2, var_floor);

    // g given the current Gamma.
    const Eigen::MatrixXd gamma = corr_from_distance(dist, p.theta) + 1e-8 * Eigen::MatrixXd::Identity(n, n);
    const auto gllt = checked_llt(gamma, "innovation covariance");
    const StateMoments& mom = e.moments;
    const double ta = gllt.solve(mom.first).trace();
    const double tb = gllt.solve(mom.s11).trace();
    const double tc = gllt.solve(mom.s10).trace();
    const double td = gllt.solve(mom.s00).trace();
    const double nn = static_cast<double>(n);
    p.g = maximise_1d([&](double g) { return state_objective(g, ta, tb, tc, td, nn); }, -0.999, 0.999, p.g, 200);

    // theta given g, on log scale.
    if (options.update_theta) {
      const double g = p.g;
      const Eigen::MatrixXd mg = (1.0 - g * g) * mom.first + mom.s11 - g * (mom.s10 + mom.s10.transpose()) + g * g * mom.s00;
      const double Td = static_cast<double>(mom.num_days);
      auto h = [&](double log_theta) {
        Eigen::MatrixXd gm = corr_from_distance(dist, std::exp(log_theta));
        gm.diagonal().array() += 1e-8;
        Eigen::LLT<Eigen::MatrixXd> llt(gm);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        return -0.5 * Td * log_det(llt) - 0.5 * llt.solve(mg).trace();
      };
      p.theta = std::exp(maximise_1d(h, std::log(options.theta_min), std::log(options.theta_max), std::log(p.theta), 30));
    }
  }
  result.params = p;
  return result;
}

GlsMoments gls_moments(const Dataset& ds, const ModelSpec& spec, const HdgmParams& p, double jitter) {
  p.validate();
  const DesignMatrix dm = design_matrix(ds, spec);
  const Layout L = make_layout(ds, dm);
  if (L.total == 0) throw Error(ErrorCode::AllMissing, "no usable observations");
  const auto n = static_cast<Index>(L.n);
  const Index cols = dm.x.cols() + 1;  // design columns then the response
  const Eigen::MatrixXd gamma = gamma_matrix(ds, p.theta, jitter);
  const double g = p.g, v = p.v, s2 = p.sigma2_eps;

  // The filter is linear in the data, so every column is filtered with the
  // same gains; innovations e_t give X' Sigma^{-1} X = sum e_t' S_t^{-1} e_t.
  Eigen::MatrixXd state = Eigen::MatrixXd::Zero(n, cols);
  Eigen::MatrixXd pf;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(cols, cols);
  for (std::size_t t = 0; t < L.T; ++t) {
    Eigen::MatrixXd p_pred = t == 0 ? Eigen::MatrixXd(gamma / (1.0 - g * g)) : Eigen::MatrixXd(g * g * pf + gamma);
    Eigen::MatrixXd m_pred = t == 0 ? state : Eigen::MatrixXd(g * state);
    const auto& o = L.obs[t];
    if (o.empty()) {
      state = m_pred;
      pf = p_pred;
      continue;
    }
    const auto k = static_cast<Index>(o.size());
    Eigen::MatrixXd data(k, cols);
    for (Index a = 0; a < k; ++a) {
      const auto i = o[static_cast<std::size_t>(a)];
      const auto row = static_cast<Index>(dm.row(static_cast<std::size_t>(i), t));
      data.row(a).head(cols - 1) = dm.x.row(row);
      data(a, cols - 1) = ds.response()(i, static_cast<Index>(t));
    }
    const Eigen::MatrixXd innov = data - v * take_rows(m_pred, o);
    const Eigen::MatrixXd p_on = take_rows(p_pred, o);
    Eigen::MatrixXd s = v * v * take(p_pred, o, o);
    s.diagonal().array() += s2;
    const auto llt = checked_llt(s, "innovation covariance of observations");
    info.noalias() += innov.transpose() * llt.solve(innov);
    const Eigen::MatrixXd w = llt.solve(v * p_on);
    state = m_pred + w.transpose() * innov;
    pf = p_pred - v * p_on.transpose() * w;
    symmetrize(pf);
  }
  GlsMoments out;
  out.xtsx = info.topLeftCorner(cols - 1, cols - 1);
  out.xtsy = info.topRightCorner(cols - 1, 1);
  return out;
}

Eigen::VectorXd gls_standard_errors(const Dataset& ds, const ModelSpec& spec, const HdgmParams& p) {
  const GlsMoments gm = gls_moments(ds, spec, p);
  const Index k = gm.xtsx.rows();
  std::vector<Index> active;
  for (Index c = 0; c < k; ++c)
    if (gm.xtsx(c, c) > 0.0) active.push_back(c);
  const Eigen::MatrixXd sub = take(gm.xtsx, active, active);
  const Eigen::MatrixXd cov = sub.ldlt().solve(Eigen::MatrixXd::Identity(sub.rows(), sub.cols()));
  Eigen::VectorXd se = Eigen::VectorXd::Constant(k, kNaN);
  for (std::size_t a = 0; a < active.size(); ++a)
    se(active[a]) = std::sqrt(std::max(cov(static_cast<Index>(a), static_cast<Index>(a)), 0.0));
  return se;
}

// ---------------------------------------------------------------------------
// Prediction

Predictor::Predictor(HdgmParams params, Dataset train, ModelSpec spec, double jitter)
    : params_(std::move(params)), train_(std::move(train)), spec_(std::move(spec)), jitter_(jitter) {
  KalmanOptions opt;
  opt.keep_covariances = true;
  opt.jitter = jitter_;
  KalmanResult k = kalman_loglik(train_, spec_, params_, opt);
  loglik_ = k.loglik;
  smoothed_ = std::move(k.smoothed);
  smoothed_cov_ = std::move(k.smoothed_cov);
  gamma_llt_ = checked_llt(gamma_matrix(train_, params_.theta, jitter_), "training correlation");
}

double Predictor::large_scale(const Eigen::VectorXd& x) const {
  if (x.size() != params_.beta.size()) throw Error(ErrorCode::LengthMismatch, "design row length");
  return x.dot(params_.beta);
}

std::vector<Prediction> Predictor::predict(std::span<const PredictionTarget> targets) const {
  const auto T = static_cast<std::ptrdiff_t>(train_.num_days());
  const double g = params_.g, v = params_.v;
  const double stationary = 1.0 / (1.0 - g * g);
  std::vector<Prediction> out;
  out.reserve(targets.size());
  const Station* cached_station = nullptr;
  Eigen::VectorXd c, k;
  double ck = 0.0;
  for (const auto& target : targets) {
    if (target.day < 0 || target.day >= T)
      throw Error(ErrorCode::TargetOutsideDateRange, "day " + std::to_string(target.day));
    if (target.x.size() != params_.beta.size() || !target.x.allFinite())
      throw Error(ErrorCode::MissingTargetCovariate, "station " + target.station.id);
    if (cached_station == nullptr || !(*cached_station == target.station)) {
      const Station s0 = target.station;
      c = (-cross_distance(std::span<const Station>(&s0, 1), train_.stations()).row(0).transpose().array() /
           params_.theta)
              .exp()
              .matrix();
      k = gamma_llt_.solve(c);
      ck = c.dot(k);
      cached_station = &target.station;
    }
    const auto t = static_cast<Eigen::Index>(target.day);
    Prediction pr;
    pr.mean = target.x.dot(params_.beta) + v * k.dot(smoothed_.mean.col(t));
    const double krig_var = std::max(stationary * (1.0 - ck), 0.0);
    const double smooth_var = k.dot(smoothed_cov_[static_cast<std::size_t>(t)] * k);
    pr.variance = v * v * (krig_var + smooth_var) + params_.sigma2_eps;
    out.push_back(pr);
  }
  return out;
}

std::vector<Prediction> predict(const HdgmParams& params, const Dataset& train, const ModelSpec& spec,
                                std::span<const PredictionTarget> targets) {
  return Predictor(params, train, spec).predict(targets);
}

nlohmann::json to_json(const HdgmParams& p) {
  return {{"beta", std::vector<double>(p.beta.data(), p.beta.data() + p.beta.size())},
          {"g", p.g},
          {"theta", p.theta},
          {"v", p.v},
          {"sigma2_eps", p.sigma2_eps}};
}

HdgmParams params_from_json(const nlohmann::json& j) {
  HdgmParams p;
  const auto beta = j.at("beta").get<std::vector<double>>();
  p.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Index>(beta.size()));
  p.g = j.at("g").get<double>();
  p.theta = j.at("theta").get<double>();
  p.v = j.at("v").get<double>();
  p.sigma2_eps = j.at("sigma2_eps").get<double>();
  p.validate();
  return p;
}

}  // namespace pmst::hdgm
