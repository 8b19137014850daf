#pragma once

#include <Eigen/Dense>

namespace dbf {

// Dense row-major storage throughout; target sizes are n <= 200.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

inline Matrix sym_part(const Matrix& X) { return 0.5 * (X + X.transpose()); }
inline Matrix skew_part(const Matrix& X) { return 0.5 * (X - X.transpose()); }

inline Matrix off_diagonal(const Matrix& X) {
  Matrix O = X;
  O.diagonal().setZero();
  return O;
}

inline double frobenius(const Matrix& X) { return X.norm(); }

/// Largest singular value of a general square matrix.
double spectral_norm(const Matrix& X);

}  // namespace dbf
