#pragma once

#include <optional>

#include "dbf/solver.hpp"

namespace dbf {

// Comparison algorithms. All of them build the rotated observation through
// the oracle and re-orthogonalize with the positive-diagonal QR factor.
enum class BaselineMethod {
  SubspaceIteration,
  QrOja,            // fixed eta supplied by the caller
  RawOja,           // eta = c / ||C_k||_2^2 from the realized observation
  TfOjaOracle,      // Oja on tf(C_k) using the oracle trace (not matrix-free)
  TfOjaHutchinson,  // Oja on C_k - (trace estimate / n) I; n + m MVPs per step
  EuclideanSgdQr,   // qf(M - eta * 2 C M off(M^T C M))
};

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::RawOja;
  double step_c = 0.1;     // constant for the norm-based Oja rules
  double eta = 0.1;        // fixed step for QrOja / EuclideanSgdQr
  // Normalizer for the Oja family. The raw variant defaults to the squared
  // realized norm and the trace-free variants to the squared signal norm,
  // which is what the iteration-count comparison grid actually measures;
  // the unsquared rule remains selectable.
  StepSchedule::Normalizer normalizer = StepSchedule::Normalizer::C2Sq;
  int hutchinson_probes = 10;
  int max_iters = 30000;
  double f_tolerance = 1e-6;
  bool record_iterates = false;
};

/// M -> qf(C_k M); n MVPs.
Matrix subspace_iteration_step(const Matrix& M, const MvpOracle& oracle);

/// M -> qf((I + eta C_k) M); n MVPs.
Matrix qr_oja_step(const Matrix& M, const MvpOracle& oracle, double eta);

/// M -> qf(M - 2 eta C M off(M^T C M)); 2n MVPs (C M and C (M off)).
Matrix euclidean_sgd_step(const Matrix& M, const MvpOracle& oracle, double eta);

/// Full baseline trajectory with the same logging contract as run_flow.
/// A run that hits max_iters without reaching f_tolerance reports
/// converged = false (the comparison tables print it as FAIL).
TrajectoryLog baseline_run(const BaselineConfig& config, const ObservationModel& model,
                           const Rotation& M0, Rng& rng);

/// H = M^T G split into (skew(H), sym(H)); M (skew + sym) reconstructs G.
std::pair<SkewGenerator, SymmetricMatrix> tangent_normal_split(const Rotation& M, const Matrix& G);

/// Subspace-iteration contraction factor (lambda2 + sigma^2)/(lambda1 + sigma^2).
double si_contraction(double lambda1, double lambda2, double sigma2);

/// QR-Oja effective step eta / (1 + eta sigma^2).
double oja_effective_step(double eta, double sigma2);

/// Frobenius cosine between the directions C M and M [A, diag A];
/// nullopt at critical points (either direction vanishes).
std::optional<double> direction_cosine(const SymmetricMatrix& C, const Rotation& M);

}  // namespace dbf
