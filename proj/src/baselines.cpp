#include "dbf/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace dbf {

Matrix subspace_iteration_step(const Matrix& M, const MvpOracle& oracle) {
  return qr_retract(oracle.apply(M)).data();
}

Matrix qr_oja_step(const Matrix& M, const MvpOracle& oracle, double eta) {
  if (eta <= 0.0) throw std::invalid_argument("qr_oja_step: eta must be > 0");
  return qr_retract(M + eta * oracle.apply(M)).data();
}

Matrix euclidean_sgd_step(const Matrix& M, const MvpOracle& oracle, double eta) {
  if (eta <= 0.0) throw std::invalid_argument("euclidean_sgd_step: eta must be > 0");
  const Matrix CM = oracle.apply(M);
  Matrix A = Matrix(M.transpose() * CM);
  A = sym_part(A);
  const Matrix O = off_diagonal(A);
  // grad_M f = 2 C M off(M^T C M); the second product goes through the
  // oracle as well.
  const Matrix G = 2.0 * oracle.apply(Matrix(M * O));
  return qr_retract(M - eta * G).data();
}

TrajectoryLog baseline_run(const BaselineConfig& config, const ObservationModel& model,
                           const Rotation& M0, Rng& rng) {
  if (config.max_iters < 1) throw std::invalid_argument("baseline_run: max_iters must be >= 1");
  if (config.method == BaselineMethod::TfOjaHutchinson && config.hutchinson_probes < 1)
    throw std::invalid_argument("baseline_run: Hutchinson mode needs probes >= 1");
  const Signal signal = build_signal(model.signal);
  const Eigen::Index n = model.signal.n;
  const double norm_ce = signal.norm_ce;

  TrajectoryLog log;
  Matrix M = M0.data();
  std::int64_t mvp_total = 0;
  bool converged = false;
  std::int64_t k = 0;
  if (config.record_iterates) log.iterates.push_back(M);

  auto resolve_eta = [&](const MvpOracle& oracle, double base_norm_hint) {
    switch (config.normalizer) {
      case StepSchedule::Normalizer::Ce2Sq: return config.step_c / (norm_ce * norm_ce);
      case StepSchedule::Normalizer::C2Sq: {
        const double nk = base_norm_hint > 0 ? base_norm_hint : oracle.policy_spectral_norm();
        return config.step_c / (nk * nk);
      }
      case StepSchedule::Normalizer::C2: {
        const double nk = base_norm_hint > 0 ? base_norm_hint : oracle.policy_spectral_norm();
        return config.step_c / nk;
      }
      case StepSchedule::Normalizer::None: return config.step_c;
    }
    return config.step_c;
  };

  // The realized norm is constant when the schedule is constant and there
  // is no anisotropic noise, so it can be probed once.
  const bool static_observation = model.noise.kind == NoiseSchedule::Kind::Constant &&
                                  model.noise.eps_E == 0.0 &&
                                  model.kind == ObservationModel::Kind::Matrix;
  double cached_norm = 0.0;

  for (; k < config.max_iters; ++k) {
    const SymmetricMatrix A_true(
        Matrix(M.transpose() * (signal.covariance.data() * M)));
    const double f_true = off_diagonal_energy(A_true);
    const double delta_true = spectral_separation(A_true);
    if (f_true < config.f_tolerance) {
      converged = true;
      TrajectoryRecord rec;
      rec.k = k;
      rec.f = f_true;
      rec.delta = delta_true;
      rec.omega_norm = commutator_generator(A_true).data().norm();
      rec.displacement = 0.0;
      rec.eta = 0.0;
      rec.mvp_count = mvp_total;
      log.records.push_back(rec);
      break;
    }

    const bool needs_entry_access = config.method == BaselineMethod::TfOjaOracle;
    const MvpOracle oracle = realize_observation(signal, model, k, rng, needs_entry_access);
    if (static_observation && cached_norm == 0.0 &&
        (config.normalizer == StepSchedule::Normalizer::C2 ||
         config.normalizer == StepSchedule::Normalizer::C2Sq))
      cached_norm = oracle.policy_spectral_norm();

    Matrix next;
    double eta = 0.0;
    switch (config.method) {
      case BaselineMethod::SubspaceIteration:
        next = subspace_iteration_step(M, oracle);
        break;
      case BaselineMethod::QrOja:
        eta = config.eta;
        next = qr_oja_step(M, oracle, eta);
        break;
      case BaselineMethod::RawOja:
        eta = resolve_eta(oracle, cached_norm);
        next = qr_oja_step(M, oracle, eta);
        break;
      case BaselineMethod::TfOjaOracle: {
        eta = config.step_c / (norm_ce * norm_ce);
        // oracle-trace mode: reads tr(C_k) directly (entry access), then
        // applies I + eta * (C_k - tr/n I). Not matrix-free.
        const double shift = oracle.trace() / static_cast<double>(n);
        const Matrix W = oracle.apply(M);
        next = qr_retract(M + eta * (W - shift * M)).data();
        break;
      }
      case BaselineMethod::TfOjaHutchinson: {
        eta = config.step_c / (norm_ce * norm_ce);
        const double trace_est = hutchinson_trace(oracle, config.hutchinson_probes, rng);
        const double shift = trace_est / static_cast<double>(n);
        const Matrix W = oracle.apply(M);
        next = qr_retract(M + eta * (W - shift * M)).data();
        break;
      }
      case BaselineMethod::EuclideanSgdQr:
        eta = config.eta;
        next = euclidean_sgd_step(M, oracle, eta);
        break;
    }
    mvp_total += oracle.mvp_count();

    TrajectoryRecord rec;
    rec.k = k;
    rec.f = f_true;
    rec.delta = delta_true;
    rec.omega_norm = commutator_generator(A_true).data().norm();
    rec.displacement = (next - M).norm();
    rec.eta = eta;
    rec.mvp_count = mvp_total;
    log.records.push_back(rec);

    M = std::move(next);
    if (config.record_iterates) log.iterates.push_back(M);
  }

  log.final_iterate = M;
  log.converged = converged;
  log.iterations = k;
  log.mvp_total = mvp_total;
  return log;
}

std::pair<SkewGenerator, SymmetricMatrix> tangent_normal_split(const Rotation& M, const Matrix& G) {
  if (M.dim() != G.rows() || G.rows() != G.cols())
    throw std::invalid_argument("tangent_normal_split: dimension mismatch");
  const Matrix H = M.data().transpose() * G;
  return {SkewGenerator(skew_part(H)), SymmetricMatrix(sym_part(H))};
}

double si_contraction(double lambda1, double lambda2, double sigma2) {
  if (!(lambda1 > lambda2)) throw std::invalid_argument("si_contraction: need lambda1 > lambda2");
  if (sigma2 < 0.0) throw std::invalid_argument("si_contraction: sigma^2 must be >= 0");
  return (lambda2 + sigma2) / (lambda1 + sigma2);
}

double oja_effective_step(double eta, double sigma2) {
  if (eta <= 0.0) throw std::invalid_argument("oja_effective_step: eta must be > 0");
  if (sigma2 < 0.0) throw std::invalid_argument("oja_effective_step: sigma^2 must be >= 0");
  return eta / (1.0 + eta * sigma2);
}

std::optional<double> direction_cosine(const SymmetricMatrix& C, const Rotation& M) {
  // The raw products C M and M Omega are exactly Frobenius-orthogonal:
  // <CM, M Omega> = tr(A Omega) = tr(A^2 D) - tr(A D A) = 0 for every (C, M).
  // The meaningful alignment statistic therefore compares the subspace
  // iteration STEP direction qf(CM) - M against M Omega, with the
  // sign-equivariant positive-diagonal Q-factor.
  const SymmetricMatrix A = rotate_covariance(M, C);
  const SkewGenerator omega = commutator_generator(A);
  const Matrix G_comm = M.data() * omega.data();
  const double nc = G_comm.norm();
  if (nc == 0.0) return std::nullopt;
  Matrix step;
  try {
    step = qr_factor_positive(Matrix(C.data() * M.data())) - M.data();
  } catch (const std::invalid_argument&) {
    return std::nullopt;  // rank-deficient C M: no defined iteration direction
  }
  const double ns = step.norm();
  if (ns == 0.0) return std::nullopt;
  return (step.array() * G_comm.array()).sum() / (ns * nc);
}

}  // namespace dbf
