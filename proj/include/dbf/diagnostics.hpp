#pragma once

#include <vector>

#include "dbf/solver.hpp"

namespace dbf {

struct ComparisonReport {
  double max_difference = 0.0;
  double mean_difference = 0.0;
  std::vector<double> per_step;
};

/// Per-step Frobenius distance between two iterate sequences of equal
/// length, with max and mean. Both runs must have recorded iterates.
ComparisonReport trajectory_difference(const TrajectoryLog& a, const TrajectoryLog& b);

/// Bound on the generator perturbation from trace-free observation error:
/// 4 ||C_e||_2 ||E_e||_F + 2 ||E_e||_F^2.
double input_bound(double norm_ce, double norm_ee);

struct IssFit {
  double contraction = 0.0;    // least-squares a in y_{k+1} = a y_k + b
  double gain = 0.0;           // least-squares b
  double steady_state = 0.0;   // mean of sqrt(f) over the last 10%
  double steady_state_median = 0.0;
  bool stationary_tail = true;
  // normalized recursion constants (1 - a)/(delta^2 eta) and b/eta,
  // filled when eta (and delta_lb) are supplied
  double contraction_rate = 0.0;
  double gain_rate = 0.0;
};

/// Fit the linear recursion on sqrt(f) and estimate the steady-state
/// radius from the last 10% of the series (median reported alongside).
/// eta and delta_lb, when positive, normalize the fitted coefficients.
IssFit iss_fit(const std::vector<double>& f_series, double eta = 0.0, double delta_lb = 0.0);

/// R_delta = (g - delta_lb) / (2 sqrt(2) ||C_e||_2). Requires 0 < delta_lb < g.
double domain_radius(double g, double delta_lb, double norm_ce);

/// max ||grad f(M) - grad f(M')||_F / ||M - M'||_F over sampled Haar pairs
/// at perturbation scale eps, using grad f = -M [A, diag A].
double empirical_lipschitz(const SymmetricMatrix& C_e, int samples, double eps, Rng& rng);

/// #{k : f_{k+1} > f_k (1 + rel_tol)}.
int monotonicity_audit(const std::vector<double>& f_series, double rel_tol = 1e-6);

/// Least-squares slope of log f vs log k for k > burn_in (1-based steps).
/// Throws if the tail contains non-positive values.
double loglog_slope(const std::vector<double>& f_series, std::size_t burn_in);

/// Ordinary least squares y = slope x + intercept with R^2.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dbf
