#include "dbf/solver.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dbf {

StepSchedule StepSchedule::constant(double c, Normalizer norm) {
  StepSchedule s;
  s.kind = Kind::Constant;
  s.c = c;
  s.normalizer = norm;
  return s;
}

StepSchedule StepSchedule::decaying(double c, double k0) {
  StepSchedule s;
  s.kind = Kind::Decaying;
  s.c = c;
  s.k0 = k0;
  return s;
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters must be >= 1");
  if (f_tolerance <= 0.0) throw std::invalid_argument("SolverConfig: f_tolerance must be > 0");
  if (reorth_period < 0) throw std::invalid_argument("SolverConfig: reorth_period must be >= 0");
  if (step.c <= 0.0) throw std::invalid_argument("SolverConfig: step constant must be > 0");
  if (step.kind == StepSchedule::Kind::Decaying && step.k0 <= 0.0)
    throw std::invalid_argument("SolverConfig: k0 must be > 0");
  if (saddle_escape.enabled &&
      (saddle_escape.gap_tol <= 0.0 || saddle_escape.offdiag_tol <= 0.0))
    throw std::invalid_argument("SolverConfig: saddle escape tolerances must be > 0");
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::vector<double> TrajectoryLog::f_series() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.f);
  return out;
}

std::string TrajectoryLog::to_csv() const {
  std::ostringstream os;
  os << "k,f,delta,omega_norm,displacement,eta,mvp_count\n";
  for (const auto& r : records) {
    os << r.k << ',' << format_double(r.f) << ',' << format_double(r.delta) << ','
       << format_double(r.omega_norm) << ',' << format_double(r.displacement) << ','
       << format_double(r.eta) << ',' << r.mvp_count << '\n';
  }
  return os.str();
}

std::string TrajectoryLog::summary_json() const {
  nlohmann::json j = {{"converged", converged},
                      {"iters", iterations},
                      {"final_f", records.empty() ? 0.0 : records.back().f},
                      {"mvp_total", mvp_total}};
  return j.dump();
}

double lipschitz_bound(Eigen::Index n, double norm_ce2) {
  if (n < 1 || norm_ce2 <= 0.0) throw std::invalid_argument("lipschitz_bound: inputs must be positive");
  return (2.0 * std::sqrt(static_cast<double>(n)) + 8.0) * norm_ce2 * norm_ce2;
}

double entry_threshold(double g, double delta_lb) {
  if (!(0.0 < delta_lb && delta_lb < g))
    throw std::invalid_argument("entry_threshold: need 0 < delta_lb < g");
  const double margin = g - delta_lb;
  return margin * margin / 8.0;
}

void audit_step_invariants(double f, double delta, double omega_norm, double g, double norm_ce) {
  const double omega2 = omega_norm * omega_norm;
  constexpr double kSlack = 1e-9;
  if (2.0 * delta * delta * f > omega2 * (1.0 + kSlack) + 1e-300)
    throw std::logic_error("step audit: lower sandwich bound violated");
  if (omega2 > 8.0 * norm_ce * norm_ce * f * (1.0 + kSlack) + 1e-300)
    throw std::logic_error("step audit: upper sandwich bound violated");
  if (delta < g - 2.0 * std::sqrt(2.0 * f) - kSlack * std::max(1.0, g))
    throw std::logic_error("step audit: domain bound violated");
}

std::optional<DegenerateBlock> detect_degenerate_block(const SymmetricMatrix& A, double gap_tol,
                                                       double offdiag_tol) {
  if (gap_tol <= 0.0 || offdiag_tol <= 0.0)
    throw std::invalid_argument("detect_degenerate_block: tolerances must be > 0");
  const Eigen::Index n = A.dim();
  std::optional<DegenerateBlock> best;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(A(i, i) - A(j, j)) > gap_tol) continue;
      const double b = A(i, j);
      if (std::abs(b) < offdiag_tol) continue;
      if (!best || std::abs(b) > std::abs(best->b)) best = DegenerateBlock{i, j, b};
    }
  }
  return best;
}

Rotation givens_escape(const Rotation& M, Eigen::Index i, Eigen::Index j) {
  const Rotation G = givens_rotation(M.dim(), i, j, M_PI / 4.0);
  return Rotation(M.data() * G.data(), Rotation::exact_retraction_tol(M.dim()));
}

std::pair<Matrix, StepDiagnostics> dbf_step(const Matrix& M, const MvpOracle& oracle, double eta,
                                            const RetractionKind& retraction, bool use_trace_free) {
  if (eta <= 0.0) throw std::invalid_argument("dbf_step: eta must be > 0");
  const Matrix W = use_trace_free ? oracle.apply_trace_free(M) : oracle.apply(M);
  const SymmetricMatrix A(Matrix(M.transpose() * W));
  const SkewGenerator omega = commutator_generator(A);

  StepDiagnostics diag;
  diag.f = off_diagonal_energy(A);
  diag.delta = spectral_separation(A);
  diag.omega_norm = omega.data().norm();

  const SkewGenerator scaled(Matrix(eta * omega.data()));
  if (std::holds_alternative<CayleyNeumann>(retraction)) {
    diag.rho = 0.5 * spectral_norm(scaled.data());
    if (diag.rho >= 1.0) {
      const double eta_max = eta / (2.0 * diag.rho);
      throw std::runtime_error(
          "dbf_step: Neumann convergence factor " + std::to_string(diag.rho) +
          " >= 1; step size too large (eta_max for this generator is about " +
          std::to_string(eta_max) + ")");
    }
  }
  return {retract(M, scaled, retraction), diag};
}

TrajectoryLog run_flow(const SolverConfig& config, const ObservationModel& model,
                       const Rotation& M0, Rng& rng) {
  config.validate();
  const Signal signal = build_signal(model.signal);
  if (M0.dim() != model.signal.n) throw std::invalid_argument("run_flow: M0 dimension mismatch");

  // sigma-free normalizers are frozen once from the signal; the realized
  // ||C_k||_2 policies re-query each observation.
  const double norm_ce = signal.norm_ce;
  const double eps_g = 1e-6 * norm_ce * norm_ce;  // escape trigger gradient threshold
  const double delta_lb = signal.gap / 4.0;
  const double f_enter = entry_threshold(signal.gap, delta_lb);

  TrajectoryLog log;
  Matrix M = M0.data();
  std::int64_t mvp_total = 0;
  bool converged = false;
  std::int64_t k = 0;

  auto ground_truth_metrics = [&](const Matrix& iterate, double& f, double& delta) {
    const SymmetricMatrix A(Matrix(iterate.transpose() * (signal.covariance.data() * iterate)));
    f = off_diagonal_energy(A);
    delta = spectral_separation(A);
    audit_step_invariants(f, delta, commutator_generator(A).data().norm(), signal.gap, norm_ce);
  };

  if (config.record_iterates) log.iterates.push_back(M);

  auto push_terminal_record = [&](std::int64_t step, double f, double delta) {
    TrajectoryRecord rec;
    rec.k = step;
    rec.f = f;
    rec.delta = delta;
    rec.omega_norm =
        commutator_generator(SymmetricMatrix(Matrix(M.transpose() * (signal.covariance.data() * M))))
            .data()
            .norm();
    rec.displacement = 0.0;
    rec.eta = 0.0;
    rec.mvp_count = mvp_total;
    log.records.push_back(rec);
  };

  for (; k < config.max_iters; ++k) {
    double f_true = 0.0, delta_true = 0.0;
    ground_truth_metrics(M, f_true, delta_true);
    if (f_true < config.f_tolerance) {
      converged = true;
      push_terminal_record(k, f_true, delta_true);
      break;
    }

    const MvpOracle oracle = realize_observation(signal, model, k, rng);
    double eta = 0.0;
    switch (config.step.kind) {
      case StepSchedule::Kind::Constant:
        switch (config.step.normalizer) {
          case StepSchedule::Normalizer::Ce2Sq: eta = config.step.c / (norm_ce * norm_ce); break;
          case StepSchedule::Normalizer::C2Sq: {
            const double nk = oracle.policy_spectral_norm();
            eta = config.step.c / (nk * nk);
            break;
          }
          case StepSchedule::Normalizer::C2: eta = config.step.c / oracle.policy_spectral_norm(); break;
          case StepSchedule::Normalizer::None: eta = config.step.c; break;
        }
        break;
      case StepSchedule::Kind::Decaying:
        eta = config.step.c / (static_cast<double>(k) + config.step.k0);
        break;
    }

    auto [next, diag] = dbf_step(M, oracle, eta, config.retraction, config.use_trace_free);

    if (config.saddle_escape.enabled && diag.omega_norm < eps_g && f_true > f_enter) {
      // escape probe re-reads the rotated observation through the oracle
      const Matrix W = oracle.apply_trace_free(M);
      const SymmetricMatrix A(Matrix(M.transpose() * W));
      if (auto block = detect_degenerate_block(A, config.saddle_escape.gap_tol,
                                               config.saddle_escape.offdiag_tol)) {
        const Rotation Mr = qr_retract(M);
        next = givens_escape(Mr, block->i, block->j).data();
      }
    }
    mvp_total += oracle.mvp_count();

    TrajectoryRecord rec;
    rec.k = k;
    rec.f = f_true;
    rec.delta = delta_true;
    rec.omega_norm = diag.omega_norm;
    rec.displacement = (next - M).norm();
    rec.eta = eta;
    rec.mvp_count = mvp_total;
    log.records.push_back(rec);

    M = std::move(next);
    if (config.reorth_period > 0 && (k + 1) % config.reorth_period == 0) M = qr_retract(M).data();
    if (config.record_iterates) log.iterates.push_back(M);
  }

  log.final_iterate = M;
  log.converged = converged;
  log.iterations = k;
  log.mvp_total = mvp_total;
  return log;
}

}  // namespace dbf
