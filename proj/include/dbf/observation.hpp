#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbf/linalg.hpp"
#include "dbf/rng.hpp"

namespace dbf {

// Signal covariance C_sig = Q Lambda Q^T with strictly descending
// eigenvalues. basis_seed == 0 is the identity-basis convention (Q = I),
// used by tests; any other seed draws Q from the Haar measure.
struct SignalSpec {
  static constexpr std::uint64_t kIdentityBasisSeed = 0;

  Eigen::Index n = 0;
  std::vector<double> eigenvalues;
  std::uint64_t basis_seed = kIdentityBasisSeed;

  /// Standard desk-scale signal: eigenvalues (n, n-1, ..., 1) * scale.
  static SignalSpec standard(Eigen::Index n, std::uint64_t basis_seed, double scale = 1.0);

  void validate() const;
  /// Minimal consecutive eigenvalue difference (> 0 for a valid spec).
  double gap() const;
};

struct NoiseSchedule {
  enum class Kind { Constant, Pulse, Explicit };
  enum class Law { GaussianSymmetricTraceFree, None };

  Kind kind = Kind::Constant;
  double sigma2 = 0.0;                 // Constant
  double pulse_base = 0.0;             // Pulse
  double pulse_sigma2 = 0.0;
  std::int64_t pulse_start = 0;
  std::int64_t pulse_end = 0;
  std::vector<double> values;          // Explicit

  double eps_E = 0.0;
  Law law = Law::None;
  // Frozen mode holds one E for the whole run (constant-perturbation
  // studies and fixture reproduction); the draw is keyed by frozen_seed.
  bool frozen = false;
  std::uint64_t frozen_seed = 0;

  static NoiseSchedule constant(double sigma2, double eps_E = 0.0,
                                Law law = Law::None);
  static NoiseSchedule pulse(double base, double pulse_sigma2, std::int64_t start,
                             std::int64_t end);
  static NoiseSchedule explicit_values(std::vector<double> values);

  void validate() const;
  double sigma2_at(std::int64_t k) const;
};

struct ObservationModel {
  enum class Kind { Matrix, SampleCovariance };

  SignalSpec signal;
  NoiseSchedule noise;
  Kind kind = Kind::Matrix;
  // Per-step draw count for the sample-covariance mode. The protocol for
  // that mode fixes no default, so it must be set explicitly.
  int samples_per_step = 0;
};

// Ground-truth bundle derived from a SignalSpec; the experiment harness
// uses it for diagnostics while solvers see only the oracle.
struct Signal {
  SymmetricMatrix covariance;
  Rotation basis;
  double gap;
  double norm_ce;  // ||tf(C_sig)||_2
};

Signal build_signal(const SignalSpec& spec);

/// Construct C_sig = Q Lambda Q^T from the spec; deterministic in the seed.
SymmetricMatrix make_signal(const SignalSpec& spec);

/// Symmetric trace-free matrix with ||E||_F = eps_E exactly (zero matrix
/// for eps_E = 0).
SymmetricMatrix trace_free_noise(Eigen::Index n, double eps_E, Rng& rng);

// Per-step observation C_k = C_sig + sigma_k^2 I + E_k behind a product
// oracle. The isotropic component is held as a scalar and composed lazily
// inside apply() as (C_dense * v) + sigma^2 * v: nothing is gained by
// forming a large-norm matrix, and the 1e8-pulse regime keeps full
// numerical headroom. The trace-free application drops that scalar
// algebraically, so consumers of tf(C_k) never see sigma^2 at all.
class MvpOracle {
 public:
  MvpOracle(Matrix dense_part, double sigma2, bool entry_access_allowed = false);

  Eigen::Index dim() const { return dense_.rows(); }

  /// C_k * V. Meter advances by the number of columns of V.
  Matrix apply(const Matrix& V) const;

  /// tf(C_k) * V = dense * V - (tr(dense)/n) * V; same metering. The
  /// sigma^2 I term cancels exactly and never enters the arithmetic.
  Matrix apply_trace_free(const Matrix& V) const;

  /// tr(C_k). Entry-level access; throws unless entry access is allowed.
  double trace() const;
  /// C_k(i, j). Entry-level access; throws unless entry access is allowed.
  double entry(Eigen::Index i, Eigen::Index j) const;

  // ||C_k||_2 of the realized observation. Step-size policy aid (the
  // baselines' protocol sets eta from it); not metered and not part of the
  // update-direction information flow.
  double policy_spectral_norm() const;

  std::int64_t mvp_count() const { return mvp_count_; }
  bool entry_access_allowed() const { return entry_access_; }

 private:
  Matrix dense_;  // C_sig + E_k (isotropic part excluded)
  double sigma2_;
  bool entry_access_;
  mutable std::int64_t mvp_count_ = 0;
};

/// Realize the observation for step k. Fresh E_k is drawn from rng per call
/// unless the schedule is frozen.
MvpOracle observe(const ObservationModel& model, std::int64_t k, Rng& rng,
                  bool entry_access_allowed = false);

/// Same as observe(), with the signal prebuilt once by the caller (the
/// per-step path used inside solver loops).
MvpOracle realize_observation(const Signal& signal, const ObservationModel& model, std::int64_t k,
                              Rng& rng, bool entry_access_allowed = false);

/// Rademacher estimate of tr(C_k): mean over m probes of z^T (C z).
/// Unbiased with Var <= 2 ||C_k||_F^2 / m; meter advances by m.
double hutchinson_trace(const MvpOracle& oracle, int probes, Rng& rng);

// JSON round-trip for the model configuration. Keys: n, eigenvalues,
// basis_seed, sigma_schedule{kind, ...}, eps_E, noise_law (+ observation
// kind and samples for the sample-covariance mode).
std::string model_to_json(const ObservationModel& model);
ObservationModel model_from_json(const std::string& text);

}  // namespace dbf
