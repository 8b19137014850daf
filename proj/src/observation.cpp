#include "dbf/observation.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace dbf {

SignalSpec SignalSpec::standard(Eigen::Index n, std::uint64_t basis_seed, double scale) {
  SignalSpec spec;
  spec.n = n;
  spec.basis_seed = basis_seed;
  spec.eigenvalues.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    spec.eigenvalues[static_cast<std::size_t>(i)] = scale * static_cast<double>(n - i);
  return spec;
}

void SignalSpec::validate() const {
  if (n < 2) throw std::invalid_argument("SignalSpec: n must be >= 2");
  if (static_cast<Eigen::Index>(eigenvalues.size()) != n)
    throw std::invalid_argument("SignalSpec: eigenvalue count must equal n");
  for (std::size_t i = 0; i + 1 < eigenvalues.size(); ++i)
    if (!(eigenvalues[i] > eigenvalues[i + 1]))
      throw std::invalid_argument("SignalSpec: eigenvalues must be strictly descending");
}

double SignalSpec::gap() const {
  validate();
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < eigenvalues.size(); ++i)
    g = std::min(g, eigenvalues[i] - eigenvalues[i + 1]);
  return g;
}

NoiseSchedule NoiseSchedule::constant(double sigma2, double eps_E, Law law) {
  NoiseSchedule s;
  s.kind = Kind::Constant;
  s.sigma2 = sigma2;
  s.eps_E = eps_E;
  s.law = (eps_E > 0.0 && law == Law::None) ? Law::GaussianSymmetricTraceFree : law;
  return s;
}

NoiseSchedule NoiseSchedule::pulse(double base, double pulse_sigma2, std::int64_t start,
                                   std::int64_t end) {
  NoiseSchedule s;
  s.kind = Kind::Pulse;
  s.pulse_base = base;
  s.pulse_sigma2 = pulse_sigma2;
  s.pulse_start = start;
  s.pulse_end = end;
  return s;
}

NoiseSchedule NoiseSchedule::explicit_values(std::vector<double> values) {
  NoiseSchedule s;
  s.kind = Kind::Explicit;
  s.values = std::move(values);
  return s;
}

void NoiseSchedule::validate() const {
  if (eps_E < 0.0) throw std::invalid_argument("NoiseSchedule: eps_E must be >= 0");
  auto check = [](double v) {
    if (v < 0.0) throw std::invalid_argument("NoiseSchedule: sigma^2 values must be >= 0");
  };
  switch (kind) {
    case Kind::Constant: check(sigma2); break;
    case Kind::Pulse:
      check(pulse_base);
      check(pulse_sigma2);
      if (pulse_end < pulse_start) throw std::invalid_argument("NoiseSchedule: pulse window empty");
      break;
    case Kind::Explicit:
      for (double v : values) check(v);
      break;
  }
}

double NoiseSchedule::sigma2_at(std::int64_t k) const {
  switch (kind) {
    case Kind::Constant: return sigma2;
    case Kind::Pulse: return (k >= pulse_start && k < pulse_end) ? pulse_sigma2 : pulse_base;
    case Kind::Explicit: {
      if (values.empty()) return 0.0;
      const auto idx = std::min<std::int64_t>(k, static_cast<std::int64_t>(values.size()) - 1);
      return values[static_cast<std::size_t>(std::max<std::int64_t>(idx, 0))];
    }
  }
  return 0.0;
}

Signal build_signal(const SignalSpec& spec) {
  spec.validate();
  const Eigen::Index n = spec.n;
  Matrix Q;
  if (spec.basis_seed == SignalSpec::kIdentityBasisSeed) {
    Q = identity(n);
  } else {
    Rng rng = Rng::stream("signal-basis", spec.basis_seed, "haar");
    Q = haar_rotation(n, rng).data();
  }
  Matrix lam = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) lam(i, i) = spec.eigenvalues[static_cast<std::size_t>(i)];
  SymmetricMatrix C(Q * lam * Q.transpose());
  const double norm_ce = operator_norm(trace_free(C));
  return Signal{std::move(C), Rotation(std::move(Q), Rotation::exact_retraction_tol(n)),
                spec.gap(), norm_ce};
}

SymmetricMatrix make_signal(const SignalSpec& spec) { return build_signal(spec).covariance; }

SymmetricMatrix trace_free_noise(Eigen::Index n, double eps_E, Rng& rng) {
  if (eps_E < 0.0) throw std::invalid_argument("trace_free_noise: eps_E must be >= 0");
  if (eps_E == 0.0) return SymmetricMatrix(Matrix::Zero(n, n));
  const Matrix G = rng.gaussian_matrix(n, n);
  SymmetricMatrix E = trace_free(SymmetricMatrix(0.5 * (G + Matrix(G.transpose()))));
  const double norm = E.data().norm();
  if (norm == 0.0) return SymmetricMatrix(Matrix::Zero(n, n));
  return SymmetricMatrix(Matrix(E.data() * (eps_E / norm)));
}

MvpOracle::MvpOracle(Matrix dense_part, double sigma2, bool entry_access_allowed)
    : dense_(std::move(dense_part)), sigma2_(sigma2), entry_access_(entry_access_allowed) {
  if (dense_.rows() != dense_.cols()) throw std::invalid_argument("MvpOracle: matrix must be square");
}

Matrix MvpOracle::apply(const Matrix& V) const {
  if (V.rows() != dense_.rows()) throw std::invalid_argument("MvpOracle::apply: dimension mismatch");
  mvp_count_ += V.cols();
  if (sigma2_ == 0.0) return dense_ * V;
  return dense_ * V + sigma2_ * V;
}

Matrix MvpOracle::apply_trace_free(const Matrix& V) const {
  if (V.rows() != dense_.rows())
    throw std::invalid_argument("MvpOracle::apply_trace_free: dimension mismatch");
  mvp_count_ += V.cols();
  const double shift = dense_.trace() / static_cast<double>(dense_.rows());
  return dense_ * V - shift * V;
}

double MvpOracle::trace() const {
  if (!entry_access_)
    throw std::logic_error("MvpOracle::trace: entry access disabled in matrix-free mode");
  return dense_.trace() + sigma2_ * static_cast<double>(dense_.rows());
}

double MvpOracle::entry(Eigen::Index i, Eigen::Index j) const {
  if (!entry_access_)
    throw std::logic_error("MvpOracle::entry: entry access disabled in matrix-free mode");
  return dense_(i, j) + (i == j ? sigma2_ : 0.0);
}

double MvpOracle::policy_spectral_norm() const {
  Matrix realized = dense_;
  realized.diagonal().array() += sigma2_;
  return operator_norm(SymmetricMatrix(std::move(realized)));
}

MvpOracle observe(const ObservationModel& model, std::int64_t k, Rng& rng,
                  bool entry_access_allowed) {
  return realize_observation(build_signal(model.signal), model, k, rng, entry_access_allowed);
}

MvpOracle realize_observation(const Signal& signal, const ObservationModel& model, std::int64_t k,
                              Rng& rng, bool entry_access_allowed) {
  model.noise.validate();
  if (k < 0) throw std::invalid_argument("observe: step index must be >= 0");
  const SymmetricMatrix& C_sig = signal.covariance;
  const Eigen::Index n = C_sig.dim();
  const double s2 = model.noise.sigma2_at(k);

  if (model.kind == ObservationModel::Kind::SampleCovariance) {
    if (model.samples_per_step < 1)
      throw std::invalid_argument("observe: sample-covariance mode needs samples_per_step >= 1");
    // Draws from N(0, C_sig + s2 I) via the symmetric square root; the
    // isotropic part is inside the samples here, so it cannot be tracked
    // symbolically.
    Matrix full = C_sig.data();
    full.diagonal().array() += s2;
    Eigen::SelfAdjointEigenSolver<Matrix> es(full);
    const Matrix root = es.eigenvectors() *
                        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
    Matrix S = Matrix::Zero(n, n);
    for (int s = 0; s < model.samples_per_step; ++s) {
      const Vector x = root * rng.gaussian_matrix(n, 1).col(0);
      S += x * x.transpose();
    }
    S /= static_cast<double>(model.samples_per_step);
    return MvpOracle(std::move(S), 0.0, entry_access_allowed);
  }

  Matrix dense = C_sig.data();
  if (model.noise.law == NoiseSchedule::Law::GaussianSymmetricTraceFree && model.noise.eps_E > 0.0) {
    if (model.noise.frozen) {
      Rng frozen = Rng::stream("frozen-noise", model.noise.frozen_seed, "E0");
      dense += trace_free_noise(n, model.noise.eps_E, frozen).data();
    } else {
      dense += trace_free_noise(n, model.noise.eps_E, rng).data();
    }
  }
  return MvpOracle(std::move(dense), s2, entry_access_allowed);
}

double hutchinson_trace(const MvpOracle& oracle, int probes, Rng& rng) {
  if (probes < 1) throw std::invalid_argument("hutchinson_trace: need at least one probe");
  const Eigen::Index n = oracle.dim();
  double acc = 0.0;
  for (int s = 0; s < probes; ++s) {
    const Vector z = rng.rademacher_vector(n);
    const Matrix w = oracle.apply(z);
    acc += z.dot(w.col(0));
  }
  return acc / static_cast<double>(probes);
}

namespace {

using nlohmann::json;

std::string law_name(NoiseSchedule::Law law) {
  return law == NoiseSchedule::Law::GaussianSymmetricTraceFree ? "gaussian-symmetric-trace-free"
                                                               : "none";
}

NoiseSchedule::Law law_from_name(const std::string& name) {
  if (name == "gaussian-symmetric-trace-free") return NoiseSchedule::Law::GaussianSymmetricTraceFree;
  if (name == "none") return NoiseSchedule::Law::None;
  throw std::invalid_argument("unknown noise law: " + name);
}

}  // namespace

std::string model_to_json(const ObservationModel& model) {
  json sched;
  switch (model.noise.kind) {
    case NoiseSchedule::Kind::Constant:
      sched = {{"kind", "constant"}, {"sigma2", model.noise.sigma2}};
      break;
    case NoiseSchedule::Kind::Pulse:
      sched = {{"kind", "pulse"},
               {"base", model.noise.pulse_base},
               {"pulse", model.noise.pulse_sigma2},
               {"start", model.noise.pulse_start},
               {"end", model.noise.pulse_end}};
      break;
    case NoiseSchedule::Kind::Explicit:
      sched = {{"kind", "explicit"}, {"values", model.noise.values}};
      break;
  }
  json j = {{"n", model.signal.n},
            {"eigenvalues", model.signal.eigenvalues},
            {"basis_seed", model.signal.basis_seed},
            {"sigma_schedule", sched},
            {"eps_E", model.noise.eps_E},
            {"noise_law", law_name(model.noise.law)}};
  if (model.noise.frozen) {
    j["frozen_noise"] = true;
    j["frozen_seed"] = model.noise.frozen_seed;
  }
  if (model.kind == ObservationModel::Kind::SampleCovariance) {
    j["observation"] = "sample-covariance";
    j["samples_per_step"] = model.samples_per_step;
  }
  return j.dump(2);
}

ObservationModel model_from_json(const std::string& text) {
  const json j = json::parse(text);
  ObservationModel model;
  model.signal.n = j.at("n").get<Eigen::Index>();
  model.signal.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  model.signal.basis_seed = j.at("basis_seed").get<std::uint64_t>();
  const json& sched = j.at("sigma_schedule");
  const std::string kind = sched.at("kind").get<std::string>();
  if (kind == "constant") {
    model.noise = NoiseSchedule::constant(sched.at("sigma2").get<double>());
  } else if (kind == "pulse") {
    model.noise = NoiseSchedule::pulse(sched.at("base").get<double>(), sched.at("pulse").get<double>(),
                                       sched.at("start").get<std::int64_t>(),
                                       sched.at("end").get<std::int64_t>());
  } else if (kind == "explicit") {
    model.noise = NoiseSchedule::explicit_values(sched.at("values").get<std::vector<double>>());
  } else {
    throw std::invalid_argument("unknown sigma_schedule kind: " + kind);
  }
  model.noise.eps_E = j.at("eps_E").get<double>();
  model.noise.law = law_from_name(j.at("noise_law").get<std::string>());
  model.noise.frozen = j.value("frozen_noise", false);
  model.noise.frozen_seed = j.value("frozen_seed", 0ULL);
  if (j.value("observation", "matrix") == std::string("sample-covariance")) {
    model.kind = ObservationModel::Kind::SampleCovariance;
    model.samples_per_step = j.at("samples_per_step").get<int>();
  }
  model.signal.validate();
  model.noise.validate();
  return model;
}

}  // namespace dbf
