#pragma once

// Dense kernels in two flavours: a plain serial reference and an OpenMP
// version. Parallel loops only split over output rows and keep every inner
// reduction in the serial order, so both flavours produce bitwise-identical
// results for any thread count.

#include <cstddef>

#include "lipcert/matrix.hpp"

namespace lipcert::kernels {

enum class Exec { serial, parallel, automatic };

/// Work size (in multiply-adds) above which `automatic` picks the OpenMP path.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

/// Number of threads the OpenMP kernels would use (1 without OpenMP).
int max_threads();
bool openmp_enabled();

namespace serial {
Matrix gemm(const Matrix& a, const Matrix& b);     // A B
Matrix gemm_nt(const Matrix& a, const Matrix& b);  // A B^T
Matrix gemm_tn(const Matrix& a, const Matrix& b);  // A^T B
bool cholesky_in_place(Matrix& a);
}  // namespace serial

namespace parallel {
Matrix gemm(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);
bool cholesky_in_place(Matrix& a);
}  // namespace parallel

Matrix gemm(const Matrix& a, const Matrix& b, Exec exec = Exec::automatic);
Matrix gemm_nt(const Matrix& a, const Matrix& b, Exec exec = Exec::automatic);
Matrix gemm_tn(const Matrix& a, const Matrix& b, Exec exec = Exec::automatic);

/// Overwrites the lower triangle of `a` with its Cholesky factor L (A = L L^T)
/// and zeroes the strict upper triangle. Returns false if a pivot is not
/// strictly positive; `a` is then left in an unspecified state.
bool cholesky_in_place(Matrix& a, Exec exec = Exec::automatic);

}  // namespace lipcert::kernels
