#include <cmath>

#include "dbf/linalg.hpp"
#include "doctest.h"

using namespace dbf;

namespace {

Matrix diag3(double a, double b, double c) {
  Matrix D = Matrix::Zero(3, 3);
  D(0, 0) = a;
  D(1, 1) = b;
  D(2, 2) = c;
  return D;
}

}  // namespace

TEST_CASE("trace_free annihilates isotropic matrices") {
  const SymmetricMatrix S(Matrix(7.0 * identity(3)));
  CHECK(trace_free(S).data().norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("trace_free leaves trace-free input unchanged and is idempotent") {
  const SymmetricMatrix S(diag3(2.0, 0.0, -2.0));
  CHECK((trace_free(S).data() - S.data()).norm() == 0.0);

  const SymmetricMatrix T(diag3(3.0, 1.0, -1.0));
  const SymmetricMatrix tf1 = trace_free(T);
  CHECK(tf1(0, 0) == doctest::Approx(2.0));
  CHECK(tf1(1, 1) == doctest::Approx(0.0));
  CHECK(tf1(2, 2) == doctest::Approx(-2.0));
  CHECK((trace_free(tf1).data() - tf1.data()).norm() <= 1e-15);
}

TEST_CASE("trace_free output has negligible trace") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const SymmetricMatrix S(sym_part(rng.gaussian_matrix(5, 5)));
    const SymmetricMatrix T = trace_free(S);
    CHECK(std::abs(T.trace()) <= 1e-12 * 5 * S.data().norm());
  }
}

TEST_CASE("rotate_covariance with identity returns the input") {
  Rng rng(3);
  const SymmetricMatrix C(sym_part(rng.gaussian_matrix(4, 4)));
  const Rotation I(identity(4));
  CHECK((rotate_covariance(I, C).data() - C.data()).norm() <= 1e-15);
}

TEST_CASE("rotate_covariance preserves eigenvalues") {
  Rng rng(11);
  const SymmetricMatrix C(sym_part(rng.gaussian_matrix(4, 4)));
  const Rotation M = haar_rotation(4, rng);
  const SymmetricMatrix A = rotate_covariance(M, C);
  const auto evc = symmetric_eigenvalues(C);
  const auto eva = symmetric_eigenvalues(A);
  for (std::size_t i = 0; i < evc.size(); ++i) CHECK(std::abs(evc[i] - eva[i]) <= 1e-10);
}

TEST_CASE("rotation into the eigenbasis diagonalizes") {
  Rng rng(5);
  const Rotation Q = haar_rotation(5, rng);
  Matrix lam = Matrix::Zero(5, 5);
  for (int i = 0; i < 5; ++i) lam(i, i) = 5 - i;
  const SymmetricMatrix C(Matrix(Q.data() * lam * Q.data().transpose()));
  CHECK(off_diagonal_energy(rotate_covariance(Q, C)) <= 1e-18);
}

TEST_CASE("rotate_covariance rejects dimension mismatch") {
  Rng rng(9);
  const SymmetricMatrix C(sym_part(rng.gaussian_matrix(4, 4)));
  const Rotation M = haar_rotation(3, rng);
  CHECK_THROWS_AS(rotate_covariance(M, C), std::invalid_argument);
}

TEST_CASE("off_diagonal_energy basics") {
  CHECK(off_diagonal_energy(SymmetricMatrix(diag3(3, 2, 1))) == 0.0);
  Matrix X(2, 2);
  X << 0, 1, 1, 0;
  CHECK(off_diagonal_energy(SymmetricMatrix(X)) == doctest::Approx(1.0));
}

TEST_CASE("off_diagonal_energy matches the subspace-iteration fixture value") {
  Matrix C(3, 3);
  C << 0.11537, 1.77881, -0.52963, 1.77881, -0.44274, 0.09983, -0.52963, 0.09983, 0.32737;
  Matrix M(3, 3);
  M << -0.18742, 0.73430, 0.65244, -0.84085, -0.46329, 0.27987, 0.50778, -0.49616, 0.70427;
  const Rotation R(std::move(M), 1e-4);  // printed to 5 decimals
  CHECK(off_diagonal_energy(rotate_covariance(R, SymmetricMatrix(std::move(C)))) ==
        doctest::Approx(3.212).epsilon(1e-3));
}

TEST_CASE("commutator_generator is zero at diagonal input") {
  CHECK(commutator_generator(SymmetricMatrix(diag3(4, 1, -2))).data().norm() == 0.0);
}

TEST_CASE("commutator_generator 2x2 closed form") {
  const double l1 = 1.7, l2 = -0.4, x = 0.35;
  Matrix A(2, 2);
  A << l1, x, x, l2;
  const SkewGenerator omega = commutator_generator(SymmetricMatrix(std::move(A)));
  CHECK(omega(0, 1) == doctest::Approx(-(l1 - l2) * x).epsilon(1e-15));
  CHECK(omega(1, 0) == doctest::Approx((l1 - l2) * x).epsilon(1e-15));
}

TEST_CASE("commutator_generator is bitwise invariant to exact diagonal shifts") {
  Rng rng(23);
  for (double alpha : {-5.0, 0.3, 1e9}) {
    const Eigen::Index n = 4;
    Matrix base = sym_part(rng.gaussian_matrix(n, n));
    // make the diagonal shift exactly representable: |d| <= |alpha|/8 keeps
    // fl(fl(alpha + d) - alpha) = fl(alpha + d) - alpha (Fast2Sum)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = rng.uniform(-std::abs(alpha) / 8.0, std::abs(alpha) / 8.0);
      base(i, i) = (alpha + d) - alpha;
    }
    Matrix shifted = base;
    shifted.diagonal().array() += alpha;
    const SkewGenerator a = commutator_generator(SymmetricMatrix(base));
    const SkewGenerator b = commutator_generator(SymmetricMatrix(shifted));
    CHECK((a.data() - b.data()).norm() == 0.0);
  }
}

TEST_CASE("spectral_separation") {
  CHECK(spectral_separation(SymmetricMatrix(diag3(3, 2, 1))) == doctest::Approx(1.0));
  CHECK(spectral_separation(SymmetricMatrix(diag3(10, 7, 3.5))) == doctest::Approx(3.0));
  Matrix A(2, 2);
  A << 1.0, 0.5, 0.5, 1.0;
  CHECK(spectral_separation(SymmetricMatrix(std::move(A))) == 0.0);
  CHECK_THROWS_AS(spectral_separation(SymmetricMatrix(Matrix::Identity(1, 1))),
                  std::invalid_argument);
}

TEST_CASE("operator_norm against constructed spectra") {
  CHECK(operator_norm(SymmetricMatrix(diag3(3, -5, 1))) == doctest::Approx(5.0));
  Matrix X(2, 2);
  X << 0, 1, 1, 0;
  CHECK(operator_norm(SymmetricMatrix(std::move(X))) == doctest::Approx(1.0));

  // random rotation of a known spectrum, below and above the eigensolve cutoff
  for (Eigen::Index n : {6L, 80L}) {
    Rng rng(static_cast<std::uint64_t>(n));
    const Rotation Q = haar_rotation(n, rng);
    Matrix lam = Matrix::Zero(n, n);
    double expected = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      lam(i, i) = rng.uniform(-3.0, 3.0);
      expected = std::max(expected, std::abs(lam(i, i)));
    }
    const SymmetricMatrix S(Matrix(Q.data() * lam * Q.data().transpose()));
    CHECK(operator_norm(S) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("haar_rotation determinism and invariants") {
  Rng a(99), b(99);
  const Rotation Ra = haar_rotation(6, a);
  const Rotation Rb = haar_rotation(6, b);
  CHECK((Ra.data() - Rb.data()).norm() == 0.0);
  CHECK((Ra.data().transpose() * Ra.data() - identity(6)).norm() <= 1e-12 * std::sqrt(6.0));
  CHECK(Ra.data().determinant() > 0.0);
}

TEST_CASE("symmetry constructor repairs small asymmetry and rejects garbage") {
  Matrix X(2, 2);
  X << 1.0, 0.5 + 1e-13, 0.5, 2.0;
  const SymmetricMatrix S(X);
  CHECK(S(0, 1) == S(1, 0));
  Matrix bad(2, 2);
  bad << 1.0, std::nan(""), 0.0, 1.0;
  CHECK_THROWS_AS((void)SymmetricMatrix(bad), std::invalid_argument);
}

TEST_CASE("rotation type enforces orthogonality and orientation") {
  Matrix flip = identity(3);
  flip(2, 2) = -1.0;
  CHECK_THROWS_AS((void)Rotation(flip), std::invalid_argument);
  Matrix near = identity(3);
  near(0, 1) = 1e-5;
  CHECK_THROWS_AS((void)Rotation(near), std::invalid_argument);
  CHECK_NOTHROW((void)Rotation(near, 1e-4));  // configurable tolerance admits fixtures
}

TEST_CASE("skew generator rejects non-skew input") {
  Matrix X(2, 2);
  X << 0.0, 1.0, 1.0, 0.0;
  CHECK_THROWS_AS((void)SkewGenerator(X), std::invalid_argument);
}

TEST_CASE("commutator norm inequality on random pairs") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix X = rng.gaussian_matrix(5, 5);
    const Matrix Y = rng.gaussian_matrix(5, 5);
    const Matrix B = X * Y - Y * X;
    CHECK(B.norm() <= 2.0 * spectral_norm(X) * Y.norm() + 1e-12);
  }
}

TEST_CASE("spectral sandwich and domain bound on random instances") {
  Rng rng(37);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 7);
    const SymmetricMatrix Ce = trace_free(SymmetricMatrix(sym_part(rng.gaussian_matrix(n, n))));
    const Rotation M = haar_rotation(n, rng);
    const SymmetricMatrix A = rotate_covariance(M, Ce);
    const double f = off_diagonal_energy(A);
    const double delta = spectral_separation(A);
    const double omega2 = std::pow(commutator_generator(A).data().norm(), 2);
    const double nce = operator_norm(Ce);
    CHECK(2.0 * delta * delta * f <= omega2 * (1.0 + 1e-12) + 1e-300);
    CHECK(omega2 <= 8.0 * nce * nce * f * (1.0 + 1e-12) + 1e-300);
    const auto ev = symmetric_eigenvalues(Ce);
    double g = 1e300;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) g = std::min(g, ev[i + 1] - ev[i]);
    CHECK(delta >= g - 2.0 * std::sqrt(2.0 * f) - 1e-12);
  }
}
