#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbf/observation.hpp"
#include "dbf/retraction.hpp"

namespace dbf {

// Step-size policy. Constant steps divide c by a norm of the signal or of
// the realized observation; decaying steps follow eta_k = c / (k + k0).
struct StepSchedule {
  enum class Kind { Constant, Decaying };
  enum class Normalizer {
    Ce2Sq,  // c / ||C_e||_2^2   (trace-free signal norm; sigma-free)
    C2Sq,   // c / ||C_k||_2^2   (realized observation norm, squared)
    C2,     // c / ||C_k||_2
    None,   // eta = c
  };

  Kind kind = Kind::Constant;
  double c = 0.1;
  Normalizer normalizer = Normalizer::Ce2Sq;
  double k0 = 100.0;

  static StepSchedule constant(double c, Normalizer norm = Normalizer::Ce2Sq);
  static StepSchedule decaying(double c, double k0);
};

struct SaddleEscapeConfig {
  bool enabled = false;
  double gap_tol = 1e-8;
  double offdiag_tol = 1e-8;
};

struct SolverConfig {
  RetractionKind retraction = CayleyExact{};
  StepSchedule step = StepSchedule::constant(0.1);
  int max_iters = 100000;
  double f_tolerance = 1e-6;
  int reorth_period = 100;  // QR re-orthogonalization cadence; 0 disables
  SaddleEscapeConfig saddle_escape;
  // Drive the update from tf(C_k) products instead of raw C_k products.
  // The generator is algebraically identical either way; with this on, the
  // isotropic component never enters the floating-point products, and runs
  // differing only in the sigma^2 schedule are identical to the bit.
  bool use_trace_free = true;
  bool record_iterates = false;

  void validate() const;
};

struct StepDiagnostics {
  double f = 0.0;           // off-diagonal energy of the observed A
  double delta = 0.0;       // spectral separation of the observed A
  double omega_norm = 0.0;  // ||Omega||_F
  double rho = 0.0;         // ||eta/2 * Omega||_2 (Neumann convergence factor)
};

struct TrajectoryRecord {
  std::int64_t k = 0;
  double f = 0.0;
  double delta = 0.0;
  double omega_norm = 0.0;
  double displacement = 0.0;
  double eta = 0.0;
  std::int64_t mvp_count = 0;
};

struct TrajectoryLog {
  std::vector<TrajectoryRecord> records;
  Matrix final_iterate;
  bool converged = false;
  std::int64_t iterations = 0;
  std::int64_t mvp_total = 0;
  std::vector<Matrix> iterates;  // filled only when requested

  std::vector<double> f_series() const;
  std::string to_csv() const;
  std::string summary_json() const;
};

/// L_C = (2 sqrt(n) + 8) * ||C_e||_2^2; the stable-step bound is 1/L_C.
double lipschitz_bound(Eigen::Index n, double norm_ce2);

// Per-step audit run on every logged iterate: the spectral sandwich
// 2 delta^2 f <= ||Omega||^2 <= 8 ||C_e||^2 f and the domain bound
// delta >= g - 2 sqrt(2 f). These hold as identities of the ground-truth
// quantities, so a violation (beyond rounding slack) is an implementation
// bug and throws.
void audit_step_invariants(double f, double delta, double omega_norm, double g, double norm_ce);

/// f_enter = (g - delta_lb)^2 / 8. Requires 0 < delta_lb < g.
double entry_threshold(double g, double delta_lb);

struct DegenerateBlock {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double b = 0.0;  // off-diagonal entry A_ij
};

/// Pair (i, j) with |A_ii - A_jj| <= gap_tol maximizing |A_ij| >= offdiag_tol.
std::optional<DegenerateBlock> detect_degenerate_block(const SymmetricMatrix& A, double gap_tol,
                                                       double offdiag_tol);

/// One plane rotation by pi/4 in the degenerate plane: M * G(i, j, pi/4).
/// At an exact degenerate block this lowers f by exactly b^2.
Rotation givens_escape(const Rotation& M, Eigen::Index i, Eigen::Index j);

// One iteration: A = sym(M^T * oracle(M)) (n MVPs), Omega = [A, diag A],
// next iterate M * R(eta * Omega). Diagnostics are measured on the observed
// A; the runner replaces f and delta with ground-truth values in the log.
std::pair<Matrix, StepDiagnostics> dbf_step(const Matrix& M, const MvpOracle& oracle, double eta,
                                            const RetractionKind& retraction, bool use_trace_free);

/// Full solver loop with logging, re-orthogonalization, optional saddle
/// escape, and ground-truth convergence metrics derived from the model.
TrajectoryLog run_flow(const SolverConfig& config, const ObservationModel& model,
                       const Rotation& M0, Rng& rng);

}  // namespace dbf
