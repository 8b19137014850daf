#include "dbf/retraction.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace dbf {

Rotation cayley_exact(const SkewGenerator& X) {
  const Eigen::Index n = X.dim();
  const Matrix lhs = identity(n) - 0.5 * X.data();
  const Matrix rhs = identity(n) + 0.5 * X.data();
  Eigen::PartialPivLU<Matrix> lu(lhs);
  // I - X/2 is nonsingular for skew X (its eigenvalues are 1 - i*t/2), so a
  // breakdown here signals a numerical problem rather than bad input.
  const Matrix Z = lu.solve(rhs);
  if (!Z.allFinite()) throw std::runtime_error("cayley_exact: linear solve failed");
  return Rotation(Z, Rotation::exact_retraction_tol(n));
}

Matrix cayley_neumann(const SkewGenerator& X, int order) {
  if (order < 1) throw std::invalid_argument("cayley_neumann: order must be >= 1");
  const double rho = spectral_norm(X.data());
  if (rho >= 1.0)
    throw std::invalid_argument("cayley_neumann: ||X||_2 = " + std::to_string(rho) +
                                " >= 1, Neumann series diverges");
  const Eigen::Index n = X.dim();
  Matrix power = identity(n);
  Matrix series = identity(n);
  for (int j = 1; j <= order; ++j) {
    power = Matrix(power * X.data());
    series += power;
  }
  return series * (identity(n) + X.data());
}

Matrix qr_factor_positive(const Matrix& Y) {
  if (Y.rows() != Y.cols()) throw std::invalid_argument("qr_factor_positive: matrix must be square");
  const Eigen::Index n = Y.rows();
  Eigen::ColPivHouseholderQR<Matrix> rank_probe(Y);
  if (rank_probe.rank() < n) throw std::invalid_argument("qr_factor_positive: rank-deficient input");
  Eigen::HouseholderQR<Matrix> qr(Y);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

Rotation qr_retract(const Matrix& Y) {
  Matrix Q = qr_factor_positive(Y);
  if (Q.determinant() < 0.0) Q.col(Q.cols() - 1) = -Q.col(Q.cols() - 1);
  return Rotation(std::move(Q), Rotation::exact_retraction_tol(Y.rows()));
}

Rotation polar_retract(const Matrix& Y) {
  if (Y.rows() != Y.cols()) throw std::invalid_argument("polar_retract: matrix must be square");
  const Eigen::Index n = Y.rows();
  Eigen::JacobiSVD<Matrix> svd(Y, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smin = svd.singularValues()(n - 1);
  if (smin <= 0.0) throw std::invalid_argument("polar_retract: rank-deficient input");
  Matrix U = svd.matrixU() * svd.matrixV().transpose();
  if (U.determinant() < 0.0)
    throw std::invalid_argument("polar_retract: input has negative orientation");
  return Rotation(std::move(U), Rotation::exact_retraction_tol(n));
}

Rotation givens_rotation(Eigen::Index n, Eigen::Index i, Eigen::Index j, double t) {
  if (!(0 <= i && i < j && j < n)) throw std::invalid_argument("givens_rotation: need 0 <= i < j < n");
  Matrix G = identity(n);
  const double c = std::cos(t);
  const double s = std::sin(t);
  G(i, i) = c;
  G(j, j) = c;
  G(i, j) = -s;
  G(j, i) = s;
  return Rotation(std::move(G), Rotation::exact_retraction_tol(n));
}

Matrix retract(const Matrix& M, const SkewGenerator& X, const RetractionKind& kind) {
  struct Visitor {
    const Matrix& M;
    const SkewGenerator& X;
    Matrix operator()(const CayleyExact&) const { return M * cayley_exact(X).data(); }
    Matrix operator()(const CayleyNeumann& c) const {
      const SkewGenerator half(Matrix(0.5 * X.data()));
      return M * cayley_neumann(half, c.order);
    }
    Matrix operator()(const QrRetraction&) const {
      return qr_retract(M + M * X.data()).data();
    }
    Matrix operator()(const PolarRetraction&) const {
      return polar_retract(M + M * X.data()).data();
    }
  };
  return std::visit(Visitor{M, X}, kind);
}

}  // namespace dbf
