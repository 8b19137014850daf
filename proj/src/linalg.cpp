#include "dbf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dbf {

double spectral_norm(const Matrix& X) {
  if (X.rows() == 0) return 0.0;
  // largest singular value via the Gram matrix; much cheaper than a full
  // SVD and accurate enough for step-size guards and norm bounds
  const Matrix gram = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

SymmetricMatrix::SymmetricMatrix(Matrix S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("SymmetricMatrix: matrix must be square");
  if (S.rows() < 1) throw std::invalid_argument("SymmetricMatrix: dimension must be positive");
  if (!S.allFinite()) throw std::invalid_argument("SymmetricMatrix: entries must be finite");
  data_ = 0.5 * (S + Matrix(S.transpose()));
}

double Rotation::exact_retraction_tol(Eigen::Index n) {
  return 1e-12 * std::sqrt(static_cast<double>(n));
}

Rotation::Rotation(Matrix M, double orth_tol) {
  if (M.rows() != M.cols()) throw std::invalid_argument("Rotation: matrix must be square");
  const Eigen::Index n = M.rows();
  if (n < 1) throw std::invalid_argument("Rotation: dimension must be positive");
  if (!M.allFinite()) throw std::invalid_argument("Rotation: entries must be finite");
  const double defect = (Matrix(M.transpose()) * M - identity(n)).norm();
  if (defect > orth_tol)
    throw std::invalid_argument("Rotation: orthogonality defect " + std::to_string(defect) +
                                " exceeds tolerance " + std::to_string(orth_tol));
  if (M.determinant() <= 0.0) throw std::invalid_argument("Rotation: determinant must be positive");
  data_ = std::move(M);
}

SkewGenerator::SkewGenerator(Matrix X) {
  if (X.rows() != X.cols()) throw std::invalid_argument("SkewGenerator: matrix must be square");
  if (!X.allFinite()) throw std::invalid_argument("SkewGenerator: entries must be finite");
  const double scale = std::max(1.0, X.norm());
  if ((X + Matrix(X.transpose())).norm() > 1e-12 * scale)
    throw std::invalid_argument("SkewGenerator: input is not skew-symmetric");
  data_ = 0.5 * (X - Matrix(X.transpose()));
  data_.diagonal().setZero();
}

SymmetricMatrix trace_free(const SymmetricMatrix& S) {
  const double shift = S.trace() / static_cast<double>(S.dim());
  Matrix T = S.data();
  T.diagonal().array() -= shift;
  return SymmetricMatrix(std::move(T));
}

SymmetricMatrix rotate_covariance(const Rotation& M, const SymmetricMatrix& C) {
  if (M.dim() != C.dim()) throw std::invalid_argument("rotate_covariance: dimension mismatch");
  return SymmetricMatrix(M.data().transpose() * (C.data() * M.data()));
}

double off_diagonal_energy(const SymmetricMatrix& A) {
  const Matrix& a = A.data();
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return 0.5 * s;
}

SkewGenerator commutator_generator(const SymmetricMatrix& A) {
  const Matrix& a = A.data();
  const Eigen::Index n = a.rows();
  Matrix omega = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = (a(j, j) - a(i, i)) * a(i, j);
      omega(i, j) = w;
      omega(j, i) = -w;
    }
  }
  return SkewGenerator(std::move(omega));
}

double spectral_separation(const SymmetricMatrix& A) {
  const Eigen::Index n = A.dim();
  if (n < 2) throw std::invalid_argument("spectral_separation: requires n >= 2");
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      best = std::min(best, std::abs(A(i, i) - A(j, j)));
  return best;
}

double operator_norm(const SymmetricMatrix& S) {
  const Eigen::Index n = S.dim();
  if (n < 64) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(S.data(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Power iteration on S^2 so degenerate +/- leading eigenvalue pairs do
  // not stall convergence; ||S||_2 = sqrt(lambda_max(S^2)).
  constexpr int kMaxIters = 10000;
  constexpr double kTol = 1e-10;
  Rng rng(0x9e3779b97f4a7c15ULL);  // fixed internal start vector
  Vector v = rng.gaussian_matrix(n, 1).col(0);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < kMaxIters; ++it) {
    Vector w = S.data() * (S.data() * v);
    const double norm_w = w.norm();
    if (norm_w == 0.0) return 0.0;
    w /= norm_w;
    const double next = norm_w;  // Rayleigh estimate of lambda_max(S^2)
    if (it > 0 && std::abs(next - lambda) <= kTol * std::max(1.0, next)) {
      return std::sqrt(next);
    }
    lambda = next;
    v = w;
  }
  throw std::runtime_error("operator_norm: power iteration did not converge within 10000 sweeps");
}

Rotation haar_rotation(Eigen::Index n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("haar_rotation: requires n >= 2");
  const Matrix G = rng.gaussian_matrix(n, n);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  if (Q.determinant() < 0.0) Q.col(n - 1) = -Q.col(n - 1);
  return Rotation(std::move(Q), Rotation::exact_retraction_tol(n));
}

std::vector<double> symmetric_eigenvalues(const SymmetricMatrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S.data(), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

}  // namespace dbf
