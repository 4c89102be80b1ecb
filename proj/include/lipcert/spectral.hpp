#pragma once

#include <optional>

#include "lipcert/matrix.hpp"

namespace lipcert {

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column k is the unit eigenvector for values[k]
};

/// Householder tridiagonalization followed by implicit-shift QL.
/// Throws ConvergenceError if an eigenvalue needs more than 60 QL sweeps.
EigenDecomposition sym_eig(const SymMatrix& s);

/// Eigenvalues only (ascending); roughly half the work of sym_eig.
Vector sym_eigvals(const SymMatrix& s);

double sym_max_eig(const SymMatrix& s);
double sym_min_eig(const SymMatrix& s);

/// Largest singular value, sqrt(lambda_max) of the smaller Gram matrix.
/// Throws NonFinite on NaN/Inf input.
double spectral_norm(const Matrix& a);

/// Cholesky factor S = L L^T of a symmetric positive definite matrix.
class Cholesky {
 public:
  /// Returns nullopt if a pivot is not strictly positive.
  static std::optional<Cholesky> factor(const SymMatrix& s);

  const Matrix& lower() const noexcept { return l_; }
  std::size_t dim() const noexcept { return l_.rows(); }

  /// X with S X = B.
  Matrix solve(const Matrix& b) const;
  /// Y with L Y = B, so that B^T S^{-1} B = Y^T Y.
  Matrix solve_lower(const Matrix& b) const;
  Matrix inverse() const;
  double log_det() const;

 private:
  explicit Cholesky(Matrix l) : l_(std::move(l)) {}
  Matrix l_;
};

enum class PdMethod { cholesky, eig };

struct PdReport {
  bool is_pd = false;
  double min_eig = 0.0;  // exact, or a certified lower bound when only Cholesky ran
  PdMethod method = PdMethod::cholesky;
  double tolerance = 0.0;
};

/// 1e-9 * max(1, ||S||_2).
double pd_tolerance(const SymMatrix& s);

/// Positive-definiteness test with is_pd == (min_eig > tol).
/// Factors S - tol*I; on success min_eig is a lower bound (or exact when
/// `exact_min_eig`), on failure it comes from the eigensolver.
PdReport check_pd(const SymMatrix& s, std::optional<double> tol = std::nullopt,
                  bool exact_min_eig = false);

/// Solves M X = B for positive definite M. Throws NotPositiveDefinite.
Matrix solve_spd(const SymMatrix& m, const Matrix& b);

/// Symmetric PSD square root. Eigenvalues below zero are clamped; throws NotPsd
/// when the smallest eigenvalue is below -1e-9 * ||S||_2.
SymMatrix sym_sqrt_psd(const SymMatrix& s);

/// D S D with D = diag(S)^{-1/2}. A congruence, so definiteness is preserved;
/// returns nullopt when some diagonal entry is not strictly positive (S is
/// then not positive definite).
std::optional<SymMatrix> equilibrate(const SymMatrix& s);

}  // namespace lipcert
