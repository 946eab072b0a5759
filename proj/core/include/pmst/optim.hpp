#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace pmst {

struct NelderMeadOptions {
  int max_iterations = 500;      // per simplex run
  int max_restarts = 20;         // fresh simplices around the incumbent
  double initial_step = 0.5;     // simplex edge in parameter units
  double ftol = 1e-15;           // relative spread of simplex values
  double restart_gain = 1e-13;   // relative improvement that justifies another restart
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Best objective value after every iteration (non-increasing).
  std::vector<double> trace;
};

/// Derivative-free minimisation with restarts from the incumbent. Each run
/// stops when the simplex value spread is below ftol or max_iterations is hit;
/// converged means the final restart failed to improve by restart_gain.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             const NelderMeadOptions& options = {});

/// Maximises a unimodal f on [lo, hi] by golden-section search to absolute
/// width `tol`; returns the best evaluated abscissa.
double golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-6,
                          int max_iterations = 200);

}  // namespace pmst
