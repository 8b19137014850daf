#pragma once

#include <vector>

#include "dbf/matrix.hpp"
#include "dbf/rng.hpp"

namespace dbf {

// Dense symmetric matrix. The constructor symmetrizes via (S + S^T)/2,
// which guards against asymmetry accumulating over repeated conjugations,
// and rejects non-finite entries.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix S);

  Eigen::Index dim() const { return data_.rows(); }
  const Matrix& data() const { return data_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }
  double trace() const { return data_.trace(); }

 private:
  Matrix data_;
};

// Element of SO(n). Orthogonality is validated against a configurable
// tolerance (default 1e-8); iterates coming out of exact retractions are
// constructed with the tighter 1e-12 * sqrt(n).
class Rotation {
 public:
  static constexpr double kDefaultTol = 1e-8;

  explicit Rotation(Matrix M, double orth_tol = kDefaultTol);

  Eigen::Index dim() const { return data_.rows(); }
  const Matrix& data() const { return data_; }

  static double exact_retraction_tol(Eigen::Index n);

 private:
  Matrix data_;
};

// Element of so(n): exactly skew-symmetric with zero diagonal. The
// constructor applies the skew projection (X - X^T)/2, which is a bitwise
// no-op on inputs that are already skew.
class SkewGenerator {
 public:
  explicit SkewGenerator(Matrix X);

  Eigen::Index dim() const { return data_.rows(); }
  const Matrix& data() const { return data_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }

 private:
  Matrix data_;
};

/// tf(S) = S - (tr S / n) I. Annihilates isotropic components.
SymmetricMatrix trace_free(const SymmetricMatrix& S);

/// A = M^T C M (symmetrized). Shares eigenvalues with C.
SymmetricMatrix rotate_covariance(const Rotation& M, const SymmetricMatrix& C);

/// f = (1/2) * sum_{i != j} A_ij^2. Zero exactly at diagonal A.
double off_diagonal_energy(const SymmetricMatrix& A);

// Commutator generator [A, diag A], evaluated entrywise as
// (A_jj - A_ii) * A_ij with the diagonal difference taken first. The
// difference-first order makes the map exactly invariant to representable
// diagonal shifts of A; forming A*D - D*A would lose that to rounding.
SkewGenerator commutator_generator(const SymmetricMatrix& A);

/// min_{i != j} |A_ii - A_jj|. Requires n >= 2.
double spectral_separation(const SymmetricMatrix& A);

// Spectral norm of a symmetric matrix: full eigensolve below n = 64,
// power iteration on S^2 above (cap 10000 sweeps, tolerance 1e-10;
// throws if the cap is reached without convergence).
double operator_norm(const SymmetricMatrix& S);

// Haar-distributed rotation: QR of a standard Gaussian matrix, each Q
// column scaled by the sign of the corresponding R diagonal, then the last
// column negated if det < 0.
Rotation haar_rotation(Eigen::Index n, Rng& rng);

/// Ascending eigenvalues of a symmetric matrix (dense solve).
std::vector<double> symmetric_eigenvalues(const SymmetricMatrix& S);

}  // namespace dbf
