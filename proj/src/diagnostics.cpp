#include "dbf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dbf {

ComparisonReport trajectory_difference(const TrajectoryLog& a, const TrajectoryLog& b) {
  if (a.iterates.empty() || b.iterates.empty())
    throw std::invalid_argument("trajectory_difference: runs must record iterates");
  if (a.iterates.size() != b.iterates.size())
    throw std::invalid_argument("trajectory_difference: length mismatch");
  ComparisonReport rep;
  rep.per_step.reserve(a.iterates.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < a.iterates.size(); ++k) {
    if (a.iterates[k].rows() != b.iterates[k].rows())
      throw std::invalid_argument("trajectory_difference: dimension mismatch");
    const double d = (a.iterates[k] - b.iterates[k]).norm();
    rep.per_step.push_back(d);
    rep.max_difference = std::max(rep.max_difference, d);
    sum += d;
  }
  rep.mean_difference = sum / static_cast<double>(rep.per_step.size());
  return rep;
}

double input_bound(double norm_ce, double norm_ee) {
  if (norm_ce < 0.0 || norm_ee < 0.0) throw std::invalid_argument("input_bound: inputs must be >= 0");
  return 4.0 * norm_ce * norm_ee + 2.0 * norm_ee * norm_ee;
}

IssFit iss_fit(const std::vector<double>& f_series, double eta, double delta_lb) {
  if (f_series.size() < 20) throw std::invalid_argument("iss_fit: series too short");
  std::vector<double> y(f_series.size());
  std::transform(f_series.begin(), f_series.end(), y.begin(),
                 [](double f) { return std::sqrt(std::max(f, 0.0)); });

  IssFit fit;
  // recursion fit y_{k+1} = a y_k + b over the whole series
  std::vector<double> x(y.begin(), y.end() - 1);
  std::vector<double> z(y.begin() + 1, y.end());
  const LinearFit lf = linear_fit(x, z);
  fit.contraction = lf.slope;
  fit.gain = lf.intercept;

  const std::size_t tail = std::max<std::size_t>(y.size() / 10, 2);
  std::vector<double> last(y.end() - static_cast<std::ptrdiff_t>(tail), y.end());
  fit.steady_state = 0.0;
  for (double v : last) fit.steady_state += v;
  fit.steady_state /= static_cast<double>(last.size());
  std::nth_element(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(last.size() / 2),
                   last.end());
  fit.steady_state_median = last[last.size() / 2];

  // stationarity: the tail's first and second halves should agree
  const std::size_t half = tail / 2;
  if (half >= 2) {
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < half; ++i) first += y[y.size() - tail + i];
    for (std::size_t i = half; i < tail; ++i) second += y[y.size() - tail + i];
    first /= static_cast<double>(half);
    second /= static_cast<double>(tail - half);
    const double scale = std::max({first, second, 1e-300});
    fit.stationary_tail = std::abs(first - second) <= 0.5 * scale;
  }
  if (eta > 0.0) {
    fit.gain_rate = fit.gain / eta;
    if (delta_lb > 0.0) fit.contraction_rate = (1.0 - fit.contraction) / (delta_lb * delta_lb * eta);
  }
  return fit;
}

double domain_radius(double g, double delta_lb, double norm_ce) {
  if (!(0.0 < delta_lb && delta_lb < g))
    throw std::invalid_argument("domain_radius: need 0 < delta_lb < g");
  if (norm_ce <= 0.0) throw std::invalid_argument("domain_radius: norm must be > 0");
  return (g - delta_lb) / (2.0 * std::sqrt(2.0) * norm_ce);
}

double empirical_lipschitz(const SymmetricMatrix& C_e, int samples, double eps, Rng& rng) {
  if (samples < 1) throw std::invalid_argument("empirical_lipschitz: samples must be >= 1");
  if (eps <= 0.0) throw std::invalid_argument("empirical_lipschitz: eps must be > 0");
  const Eigen::Index n = C_e.dim();
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Rotation M = haar_rotation(n, rng);
    Matrix K = skew_part(rng.gaussian_matrix(n, n));
    const double kn = K.norm();
    if (kn == 0.0) continue;
    K *= eps / kn;
    const Matrix M2 = M.data() * cayley_exact(SkewGenerator(std::move(K))).data();
    auto grad = [&](const Matrix& R) {
      const SymmetricMatrix A(Matrix(R.transpose() * (C_e.data() * R)));
      return Matrix(-R * commutator_generator(A).data());
    };
    const double dist = (M.data() - M2).norm();
    if (dist == 0.0) continue;
    best = std::max(best, (grad(M.data()) - grad(M2)).norm() / dist);
  }
  return best;
}

int monotonicity_audit(const std::vector<double>& f_series, double rel_tol) {
  int count = 0;
  for (std::size_t k = 0; k + 1 < f_series.size(); ++k)
    if (f_series[k + 1] > f_series[k] * (1.0 + rel_tol)) ++count;
  return count;
}

double loglog_slope(const std::vector<double>& f_series, std::size_t burn_in) {
  std::vector<double> xs, ys;
  for (std::size_t k = burn_in; k < f_series.size(); ++k) {
    const double f = f_series[k];
    if (!(f > 0.0)) throw std::invalid_argument("loglog_slope: series must be positive after burn-in");
    xs.push_back(std::log(static_cast<double>(k + 1)));
    ys.push_back(std::log(f));
  }
  if (xs.size() < 2) throw std::invalid_argument("loglog_slope: not enough points after burn-in");
  return linear_fit(xs, ys).slope;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need two equal-length samples");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissa");
  LinearFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.slope * x[i] + fit.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

}  // namespace dbf
