#include <cmath>

#include "dbf/diagnostics.hpp"
#include "doctest.h"

using namespace dbf;

TEST_CASE("trajectory_difference on identical and diverging runs") {
  TrajectoryLog a, b;
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    const Matrix M = rng.gaussian_matrix(3, 3);
    a.iterates.push_back(M);
    b.iterates.push_back(M);
  }
  const ComparisonReport same = trajectory_difference(a, b);
  CHECK(same.max_difference == 0.0);
  CHECK(same.mean_difference == 0.0);

  b.iterates[3] += Matrix(Matrix::Identity(3, 3));
  const ComparisonReport diff = trajectory_difference(a, b);
  CHECK(diff.max_difference == doctest::Approx(std::sqrt(3.0)));

  b.iterates.pop_back();
  CHECK_THROWS_AS(trajectory_difference(a, b), std::invalid_argument);
}

TEST_CASE("input_bound formula and edge") {
  CHECK(input_bound(1.0, 0.0) == 0.0);
  CHECK(input_bound(1.0, 0.1) == doctest::Approx(0.42));
}

TEST_CASE("input_bound dominates measured generator perturbation") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 9);
    const SymmetricMatrix Ce = trace_free(SymmetricMatrix(sym_part(rng.gaussian_matrix(n, n))));
    const Rotation M = haar_rotation(n, rng);
    const SymmetricMatrix Ee = trace_free_noise(n, rng.uniform(), rng);
    const SymmetricMatrix A = rotate_covariance(M, Ce);
    const SymmetricMatrix Ap(Matrix(A.data() + rotate_covariance(M, Ee).data()));
    const double measured = (commutator_generator(Ap).data() - commutator_generator(A).data()).norm();
    CHECK(measured <= input_bound(operator_norm(Ce), Ee.data().norm()) + 1e-12);
  }
}

TEST_CASE("iss_fit: zero noise tail gives zero steady state") {
  std::vector<double> f(200);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = std::exp(-0.1 * static_cast<double>(k));
  const IssFit fit = iss_fit(f);
  CHECK(fit.steady_state <= 1e-4);
  CHECK(fit.contraction < 1.0);
}

TEST_CASE("iss_fit recovers a planted linear recursion") {
  // y_{k+1} = a y_k + b with known a, b
  const double a = 0.95, b = 0.02;
  std::vector<double> f;
  double y = 1.0;
  for (int k = 0; k < 400; ++k) {
    f.push_back(y * y);
    y = a * y + b;
  }
  const IssFit fit = iss_fit(f);
  CHECK(fit.contraction == doctest::Approx(a).epsilon(1e-6));
  CHECK(fit.gain == doctest::Approx(b).epsilon(1e-4));
  CHECK(fit.steady_state == doctest::Approx(b / (1 - a)).epsilon(1e-3));
  CHECK(fit.stationary_tail);
}

TEST_CASE("domain_radius formula") {
  CHECK(domain_radius(1.0, 0.5, 1.0) == doctest::Approx(0.5 / (2.0 * std::sqrt(2.0))));
  CHECK(domain_radius(1.0, 0.999999, 1.0) <= 1e-5);
  CHECK_THROWS_AS(domain_radius(1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("empirical_lipschitz: zero signal gives zero, bound holds") {
  Rng rng(43);
  const SymmetricMatrix zero(Matrix(Matrix::Zero(5, 5)));
  CHECK(empirical_lipschitz(zero, 10, 1e-4, rng) == 0.0);

  const SymmetricMatrix Ce =
      trace_free(make_signal(SignalSpec::standard(6, 55)));
  Rng rng2(44);
  const double L_est = empirical_lipschitz(Ce, 100, 1e-4, rng2);
  CHECK(L_est > 0.0);
  CHECK(L_est <= lipschitz_bound(6, operator_norm(Ce)));
}

TEST_CASE("monotonicity_audit counts strict ascents beyond tolerance") {
  CHECK(monotonicity_audit({5, 5, 5, 5}) == 0);
  CHECK(monotonicity_audit({5, 4, 3, 2}) == 0);
  CHECK(monotonicity_audit({5, 6, 3, 7}) == 2);
  CHECK(monotonicity_audit({1.0, 1.0 + 1e-9}) == 0);  // within relative tolerance
}

TEST_CASE("loglog_slope on synthetic series") {
  std::vector<double> inv_k, flat;
  for (int k = 1; k <= 500; ++k) {
    inv_k.push_back(1.0 / k);
    flat.push_back(2.5);
  }
  CHECK(loglog_slope(inv_k, 10) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(loglog_slope(flat, 10) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({1.0, -1.0, 1.0}, 0), std::invalid_argument);
}

TEST_CASE("linear_fit recovers planted line") {
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(i);
    y.push_back(3.0 * i - 7.0);
  }
  const LinearFit fit = linear_fit(x, y);
  CHECK(fit.slope == doctest::Approx(3.0));
  CHECK(fit.intercept == doctest::Approx(-7.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("finite-difference directional derivative matches the commutator pairing") {
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.next_u64() % 5);
    const SymmetricMatrix C(sym_part(rng.gaussian_matrix(n, n)));
    const Rotation M = haar_rotation(n, rng);
    Matrix Xi = skew_part(rng.gaussian_matrix(n, n));
    Xi /= Xi.norm();
    const SkewGenerator dir(std::move(Xi));
    const SymmetricMatrix A = rotate_covariance(M, C);
    const double expected = -((commutator_generator(A).data().array() * dir.data().array()).sum());
    auto f_at = [&](double t) {
      const Matrix Mt = M.data() * cayley_exact(SkewGenerator(Matrix(t * dir.data()))).data();
      return off_diagonal_energy(SymmetricMatrix(Matrix(Mt.transpose() * (C.data() * Mt))));
    };
    const double h = 1e-3;
    const double fd_h = (f_at(h) - f_at(-h)) / (2.0 * h);
    const double fd_h2 = (f_at(h / 2) - f_at(-h / 2)) / h;
    const double err_h = std::abs(fd_h - expected);
    const double err_h2 = std::abs(fd_h2 - expected);
    CHECK(err_h <= 1e-4 * std::max(1.0, std::abs(expected)));
    if (err_h > 1e-10) CHECK(err_h2 <= 0.35 * err_h);  // second order in h
  }
}
