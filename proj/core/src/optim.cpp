#include "pmst/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pmst {

namespace {

double safe_eval(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

struct Run {
  Eigen::VectorXd x;
  double value;
  int iterations;
};

Run simplex_run(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start, double fstart,
                const NelderMeadOptions& o, std::vector<double>& trace) {
  const Eigen::Index n = start.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), start);
  std::vector<double> val(static_cast<std::size_t>(n + 1), fstart);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& p = pts[static_cast<std::size_t>(i + 1)];
    p(i) += o.initial_step;
    val[static_cast<std::size_t>(i + 1)] = safe_eval(f, p);
  }
  std::vector<std::size_t> order(pts.size());
  int it = 0;
  for (; it < o.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    trace.push_back(val[best]);
    const double spread = val[worst] - val[best];
    if (std::isfinite(spread) && spread <= o.ftol * (std::abs(val[best]) + 1e-300)) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (k != worst) centroid += pts[k];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = safe_eval(f, xr);
    if (fr < val[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = safe_eval(f, xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = safe_eval(f, xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      val[k] = safe_eval(f, pts[k]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[best], val[best], it};
}

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             const NelderMeadOptions& options) {
  NelderMeadResult result;
  result.x = std::move(x0);
  result.value = safe_eval(f, result.x);
  NelderMeadOptions o = options;
  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    const Run run = simplex_run(f, result.x, result.value, o, result.trace);
    result.iterations += run.iterations;
    const double gain = result.value - run.value;
    const bool improved = run.value < result.value;
    if (improved) {
      result.x = run.x;
      result.value = run.value;
    }
    if (!(gain > options.restart_gain * (std::abs(result.value) + 1e-300)) && restart > 0) {
      result.converged = true;
      break;
    }
    o.initial_step = std::max(o.initial_step * 0.5, 1e-4);
  }
  for (std::size_t k = 1; k < result.trace.size(); ++k) result.trace[k] = std::min(result.trace[k], result.trace[k - 1]);
  return result;
}

double golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iterations) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  double best_x = fc >= fd ? c : d;
  double best_f = std::max(fc, fd);
  for (int it = 0; it < max_iterations && (b - a) > tol; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      if (fc > best_f) best_f = fc, best_x = c;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      if (fd > best_f) best_f = fd, best_x = d;
    }
  }
  return best_x;
}

}  // namespace pmst
