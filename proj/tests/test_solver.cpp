#include <cmath>

#include "dbf/baselines.hpp"
#include "dbf/diagnostics.hpp"
#include "dbf/solver.hpp"
#include "doctest.h"

using namespace dbf;

namespace {

ObservationModel standard_model(Eigen::Index n, double sigma2, double eps_e = 0.0) {
  ObservationModel model;
  model.signal = SignalSpec::standard(n, 42);
  model.noise = NoiseSchedule::constant(sigma2, eps_e);
  return model;
}

}  // namespace

TEST_CASE("lipschitz_bound formula values") {
  CHECK(lipschitz_bound(10, 1.0) == doctest::Approx(2.0 * std::sqrt(10.0) + 8.0).epsilon(1e-12));
  CHECK(lipschitz_bound(10, 1.0) == doctest::Approx(14.32).epsilon(1e-3));
  CHECK(lipschitz_bound(100, 1.0) == doctest::Approx(28.00).epsilon(1e-12));
  CHECK(lipschitz_bound(5, 2.0) == doctest::Approx((2.0 * std::sqrt(5.0) + 8.0) * 4.0).epsilon(1e-12));
  CHECK_THROWS_AS(lipschitz_bound(0, 1.0), std::invalid_argument);
}

TEST_CASE("entry_threshold formula") {
  CHECK(entry_threshold(1.0, 1e-12) == doctest::Approx(1.0 / 8.0).epsilon(1e-9));
  CHECK(entry_threshold(1.0, 0.25) == doctest::Approx(9.0 / 128.0).epsilon(1e-12));
  CHECK(entry_threshold(0.1, 0.025) == doctest::Approx(0.075 * 0.075 / 8.0).epsilon(1e-12));
  CHECK_THROWS_AS(entry_threshold(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("dbf_step is a fixed point at a diagonalizer") {
  const Eigen::Index n = 4;
  SignalSpec spec = SignalSpec::standard(n, SignalSpec::kIdentityBasisSeed);
  const SymmetricMatrix C = make_signal(spec);  // diagonal
  MvpOracle oracle(Matrix(C.data()), 0.0);
  const Matrix M = identity(n);
  const auto [next, diag] = dbf_step(M, oracle, 0.01, CayleyExact{}, true);
  CHECK((next - M).norm() == 0.0);
  CHECK(diag.omega_norm == 0.0);
}

TEST_CASE("dbf_step with trace-free products is bitwise sigma-invariant") {
  const Eigen::Index n = 8;
  const ObservationModel base = standard_model(n, 0.0);
  Rng rng(3);
  const Rotation M0 = haar_rotation(n, rng);
  const SymmetricMatrix C = make_signal(base.signal);
  for (double sigma2 : {1e6, 1e3}) {
    MvpOracle clean(Matrix(C.data()), 0.0);
    MvpOracle noisy(Matrix(C.data()), sigma2);
    const auto [a, da] = dbf_step(M0.data(), clean, 1e-3, CayleyNeumann{3}, true);
    const auto [b, db] = dbf_step(M0.data(), noisy, 1e-3, CayleyNeumann{3}, true);
    CHECK((a - b).norm() == 0.0);
    // raw products leave a rounding-level residue instead
    const auto [c, dc] = dbf_step(M0.data(), clean, 1e-3, CayleyNeumann{3}, false);
    const auto [d, dd] = dbf_step(M0.data(), noisy, 1e-3, CayleyNeumann{3}, false);
    CHECK((c - d).norm() <= 1e-10);
    CHECK((c - a).norm() <= 1e-9);  // both routes advance the same flow
  }
}

TEST_CASE("a commutator step descends where Euclidean SGD ascends") {
  // the 2x2 direction-reversal fixture: sigma = 5 (sigma^2 = 25)
  Matrix Cs(2, 2);
  Cs << 0.35377, 0.35731, 0.35731, 1.12382;
  Matrix M0m(2, 2);
  M0m << 0.77485, 0.63214, -0.63214, 0.77485;
  const SymmetricMatrix C_sig(Cs);
  const Rotation M0(M0m, 1e-4);
  const double f0 = off_diagonal_energy(rotate_covariance(M0, C_sig));

  MvpOracle oracle(Matrix(C_sig.data()), 25.0);
  const auto [next, diag] = dbf_step(M0.data(), oracle, 0.5, CayleyExact{}, true);
  const SymmetricMatrix A1(Matrix(next.transpose() * (C_sig.data() * next)));
  CHECK(off_diagonal_energy(A1) < f0);

  MvpOracle oracle2(Matrix(C_sig.data()), 25.0);
  const Matrix eucl = euclidean_sgd_step(M0.data(), oracle2, 0.5);
  const SymmetricMatrix A2(Matrix(eucl.transpose() * (C_sig.data() * eucl)));
  CHECK(off_diagonal_energy(A2) > f0);
}

TEST_CASE("run_flow converges on the standard signal and meters n MVPs per iteration") {
  const Eigen::Index n = 10;
  SolverConfig config;
  config.retraction = CayleyNeumann{3};
  config.max_iters = 10000;
  Rng init = Rng::stream("test-run", 1, "init");
  const Rotation M0 = haar_rotation(n, init);
  Rng rng = Rng::stream("test-run", 1, "noise");
  const TrajectoryLog log = run_flow(config, standard_model(n, 0.0), M0, rng);
  CHECK(log.converged);
  CHECK(log.iterations > 100);
  CHECK(log.iterations < 5000);
  CHECK(log.mvp_total == log.iterations * n);
  CHECK(log.records.back().f < 1e-6);  // terminal record carries the converged value
  CHECK(static_cast<std::int64_t>(log.records.size()) == log.iterations + 1);
  // monotone descent at the default step size
  CHECK(monotonicity_audit(log.f_series()) == 0);
}

TEST_CASE("run_flow at the eigenbasis converges immediately") {
  const Eigen::Index n = 6;
  const ObservationModel model = standard_model(n, 0.0);
  const Signal signal = build_signal(model.signal);
  SolverConfig config;
  Rng rng(1);
  const TrajectoryLog log = run_flow(config, model, signal.basis, rng);
  CHECK(log.converged);
  CHECK(log.iterations == 0);
}

TEST_CASE("run_flow with decaying steps tracks a 1/k floor") {
  const Eigen::Index n = 6;
  SolverConfig config;
  config.retraction = CayleyNeumann{3};
  config.step = StepSchedule::decaying(0.5, 100.0);
  config.max_iters = 4000;
  config.f_tolerance = 1e-300;
  const ObservationModel model = standard_model(n, 0.0, 0.3);
  const Signal signal = build_signal(model.signal);
  Rng rng = Rng::stream("test-decay", 1, "noise");
  const TrajectoryLog log = run_flow(config, model, signal.basis, rng);
  const double slope = loglog_slope(log.f_series(), 1000);
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.35));
}

TEST_CASE("neumann step rejects too-large steps loudly") {
  const Eigen::Index n = 6;
  const SymmetricMatrix C = make_signal(SignalSpec::standard(n, 42));
  Rng rng(5);
  const Rotation M = haar_rotation(n, rng);
  MvpOracle oracle(Matrix(C.data()), 0.0);
  CHECK_THROWS_WITH_AS(dbf_step(M.data(), oracle, 50.0, CayleyNeumann{3}, true),
                       doctest::Contains("eta_max"), std::runtime_error);
}

TEST_CASE("detect_degenerate_block finds the dominant pair") {
  Matrix A = Matrix::Zero(4, 4);
  A(0, 0) = A(1, 1) = 1.0;
  A(2, 2) = A(3, 3) = 2.0;
  A(0, 1) = A(1, 0) = 0.2;
  A(2, 3) = A(3, 2) = 0.7;
  const auto block = detect_degenerate_block(SymmetricMatrix(A), 1e-8, 1e-8);
  REQUIRE(block.has_value());
  CHECK(block->i == 2);
  CHECK(block->j == 3);
  CHECK(block->b == doctest::Approx(0.7));

  CHECK(!detect_degenerate_block(SymmetricMatrix(Matrix(Matrix::Identity(3, 3))), 1e-8, 1e-8));

  Matrix B(2, 2);
  B << 1.0, 0.5, 0.5, 1.0;
  const auto simple = detect_degenerate_block(SymmetricMatrix(B), 1e-8, 1e-8);
  REQUIRE(simple.has_value());
  CHECK(simple->b == doctest::Approx(0.5));
}

TEST_CASE("givens_escape drops f by exactly b^2 at an exact degenerate block") {
  const Eigen::Index n = 4;
  Rng rng(9);
  Matrix C = sym_part(rng.gaussian_matrix(n, n));
  C(0, 0) = C(1, 1) = 0.75;
  C(0, 1) = C(1, 0) = 0.5;
  const SymmetricMatrix Cs(C);
  const Rotation M(identity(n));
  const double f0 = off_diagonal_energy(rotate_covariance(M, Cs));
  const Rotation escaped = givens_escape(M, 0, 1);
  const double f1 = off_diagonal_energy(rotate_covariance(escaped, Cs));
  CHECK(f0 - f1 == doctest::Approx(0.25).epsilon(1e-10));

  // b = 0 leaves f unchanged
  Matrix D = Matrix::Zero(3, 3);
  D(0, 0) = D(1, 1) = 1.0;
  D(2, 2) = 2.0;
  const SymmetricMatrix Ds(D);
  const Rotation I3(identity(3));
  const double g0 = off_diagonal_energy(rotate_covariance(I3, Ds));
  const Rotation esc = givens_escape(I3, 0, 1);
  const double g1 = off_diagonal_energy(rotate_covariance(esc, Ds));
  CHECK(std::abs(g1 - g0) <= 1e-15);
}

TEST_CASE("saddle escape frees a trajectory pinned at a degenerate block") {
  // identity-basis signal; a 45-degree plane rotation sits at a strict
  // saddle: equal diagonal pair, zero generator
  const Eigen::Index n = 5;
  ObservationModel model;
  model.signal = SignalSpec::standard(n, SignalSpec::kIdentityBasisSeed);
  model.noise = NoiseSchedule::constant(0.0);
  const Rotation M0 = givens_rotation(n, 0, 1, M_PI / 4.0);

  SolverConfig stuck;
  stuck.retraction = CayleyExact{};
  stuck.max_iters = 300;
  Rng r1(1);
  const TrajectoryLog no_escape = run_flow(stuck, model, M0, r1);
  CHECK(!no_escape.converged);
  CHECK(no_escape.records.back().omega_norm <= 1e-12);

  SolverConfig freed = stuck;
  freed.max_iters = 5000;
  freed.saddle_escape.enabled = true;
  Rng r2(1);
  const TrajectoryLog escaped = run_flow(freed, model, M0, r2);
  CHECK(escaped.converged);
  // the first escape removes exactly b^2 = 0.25 from f
  CHECK(escaped.records[0].f == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(escaped.records[1].f <= 1e-10);
}

TEST_CASE("trajectory log serialization") {
  const Eigen::Index n = 5;
  SolverConfig config;
  config.max_iters = 10;
  config.f_tolerance = 1e-300;
  Rng init(3);
  const Rotation M0 = haar_rotation(n, init);
  Rng rng(4);
  const TrajectoryLog log = run_flow(config, standard_model(n, 0.0), M0, rng);
  const std::string csv = log.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) == "k,f,delta,omega_norm,displacement,eta,mvp_count");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);  // header + 10 rows
  CHECK(log.summary_json().find("\"converged\":false") != std::string::npos);
}
