#include "lipcert/kernels.hpp"

#include <cmath>

#include "lipcert/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lipcert::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": inner dimensions differ");
}

// Row kernels shared by both flavours, so the summation order is identical.

inline void gemm_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  auto out = c.row(i);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    if (aik == 0.0) continue;
    const auto brow = b.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += aik * brow[j];
  }
}

inline void gemm_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const auto arow = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(arow, b.row(j));
}

inline void gemm_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  auto out = c.row(i);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double aki = a(k, i);
    if (aki == 0.0) continue;
    const auto brow = b.row(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += aki * brow[j];
  }
}

// Left-looking column step: entry (i, j) of L for i > j.
inline void cholesky_entry(Matrix& a, std::size_t i, std::size_t j, double pivot) {
  double s = a(i, j);
  const double* li = a.data() + i * a.cols();
  const double* lj = a.data() + j * a.cols();
  for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
  a(i, j) = s / pivot;
}

inline bool cholesky_pivot(Matrix& a, std::size_t j, double& pivot) {
  double s = a(j, j);
  const double* lj = a.data() + j * a.cols();
  for (std::size_t k = 0; k < j; ++k) s -= lj[k] * lj[k];
  if (!(s > 0.0) || !std::isfinite(s)) return false;
  pivot = std::sqrt(s);
  a(j, j) = pivot;
  return true;
}

void zero_upper(Matrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) a(i, j) = 0.0;
}

}  // namespace

namespace serial {

Matrix gemm(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "gemm");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) gemm_row(a, b, c, i);
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "gemm_nt");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) gemm_nt_row(a, b, c, i);
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "gemm_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) gemm_tn_row(a, b, c, i);
  return c;
}

bool cholesky_in_place(Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix not square");
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = 0.0;
    if (!cholesky_pivot(a, j, pivot)) return false;
    for (std::size_t i = j + 1; i < n; ++i) cholesky_entry(a, i, j, pivot);
  }
  zero_upper(a);
  return true;
}

}  // namespace serial

namespace parallel {

Matrix gemm(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "gemm");
  Matrix c(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) gemm_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "gemm_nt");
  Matrix c(a.rows(), b.rows());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) gemm_nt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "gemm_tn");
  Matrix c(a.cols(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) gemm_tn_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

bool cholesky_in_place(Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: matrix not square");
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = 0.0;
    if (!cholesky_pivot(a, j, pivot)) return false;
    const auto last = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(j) + 1; i < last; ++i)
      cholesky_entry(a, static_cast<std::size_t>(i), j, pivot);
  }
  zero_upper(a);
  return true;
}

}  // namespace parallel

namespace {
bool use_parallel(Exec exec, std::size_t work) {
  if (exec == Exec::serial) return false;
  if (exec == Exec::parallel) return true;
  return openmp_enabled() && max_threads() > 1 && work >= kParallelThreshold;
}
}  // namespace

Matrix gemm(const Matrix& a, const Matrix& b, Exec exec) {
  return use_parallel(exec, a.rows() * a.cols() * b.cols()) ? parallel::gemm(a, b) : serial::gemm(a, b);
}

Matrix gemm_nt(const Matrix& a, const Matrix& b, Exec exec) {
  return use_parallel(exec, a.rows() * a.cols() * b.rows()) ? parallel::gemm_nt(a, b)
                                                             : serial::gemm_nt(a, b);
}

Matrix gemm_tn(const Matrix& a, const Matrix& b, Exec exec) {
  return use_parallel(exec, a.rows() * a.cols() * b.cols()) ? parallel::gemm_tn(a, b)
                                                             : serial::gemm_tn(a, b);
}

bool cholesky_in_place(Matrix& a, Exec exec) {
  // the column loop synchronizes n times; only worth it for big matrices
  const std::size_t n = a.rows();
  return use_parallel(exec, n * n * n / 3 / 8) ? parallel::cholesky_in_place(a)
                                                : serial::cholesky_in_place(a);
}

}  // namespace lipcert::kernels
