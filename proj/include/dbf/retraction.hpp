#pragma once

#include <variant>

#include "dbf/linalg.hpp"

namespace dbf {

struct CayleyExact {};
struct CayleyNeumann {
  int order = 3;
};
struct QrRetraction {};
struct PolarRetraction {};

using RetractionKind = std::variant<CayleyExact, CayleyNeumann, QrRetraction, PolarRetraction>;

/// Cay(X) = (I - X/2)^{-1} (I + X/2), solved by dense LU with partial pivoting.
Rotation cayley_exact(const SkewGenerator& X);

// Truncated Cayley: S_K(X) * (I + X) with S_K(X) = I + X + ... + X^K.
// Approximates cayley_exact(2X); the truncation error is exactly
// X^{K+1} * (I - X)^{-1} (I + X). Requires ||X||_2 < 1, else the series
// diverges and the call throws.
Matrix cayley_neumann(const SkewGenerator& X, int order);

/// Q-factor of the QR decomposition with positive diagonal R. Sign
/// equivariant: qr_factor_positive(-Y) == -qr_factor_positive(Y).
Matrix qr_factor_positive(const Matrix& Y);

/// Positive-diagonal Q-factor with det forced to +1 by a final-column flip.
Rotation qr_retract(const Matrix& Y);

/// Orthogonal polar factor U V^T from the SVD. Requires full rank and
/// positive determinant (result must land in SO(n)).
Rotation polar_retract(const Matrix& Y);

/// Plane rotation by angle t in coordinates (i, j); identity elsewhere.
Rotation givens_rotation(Eigen::Index n, Eigen::Index i, Eigen::Index j, double t);

/// Apply the chosen retraction to M * R(X). CayleyNeumann yields a
/// near-rotation (orthogonality defect O(rho^{K+1})), so the result is a
/// plain matrix; exact paths stay on SO(n) to machine precision.
Matrix retract(const Matrix& M, const SkewGenerator& X, const RetractionKind& kind);

}  // namespace dbf
