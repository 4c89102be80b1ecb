#include "lipcert/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lipcert/errors.hpp"
#include "lipcert/kernels.hpp"

namespace lipcert {

namespace {

constexpr int kMaxQlSweeps = 60;

// Householder reduction of a symmetric matrix to tridiagonal form. On exit
// `d` holds the diagonal, `e[1..n)` the subdiagonal, and `a` the accumulated
// orthogonal transform when `want_vectors` is set.
void tridiagonalize(Matrix& a, Vector& d, Vector& e, bool want_vectors) {
  const int n = static_cast<int>(a.rows());
  for (int i = n - 1; i > 0; --i) {
    const int l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (int k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        e[i] = a(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          if (want_vectors) a(j, i) = a(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (int k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[j] = g / h;
          f += e[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          f = a(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k <= j; ++k) a(j, k) -= (f * e[k] + g * a(i, k));
        }
      }
    } else {
      e[i] = a(i, l);
    }
    d[i] = h;
  }
  if (n > 0) d[0] = 0.0;
  if (n > 0) e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (want_vectors) {
      if (d[i] != 0.0) {
        for (int j = 0; j < i; ++j) {
          double g = 0.0;
          for (int k = 0; k < i; ++k) g += a(i, k) * a(k, j);
          for (int k = 0; k < i; ++k) a(k, j) -= g * a(k, i);
        }
      }
      d[i] = a(i, i);
      a(i, i) = 1.0;
      for (int j = 0; j < i; ++j) a(j, i) = a(i, j) = 0.0;
    } else {
      d[i] = a(i, i);
    }
  }
}

// Implicit-shift QL on the tridiagonal (d, e); rotations are accumulated into
// the columns of z when given.
void tridiagonal_ql(Vector& d, Vector& e, Matrix* z) {
  const int n = static_cast<int>(d.size());
  if (n == 0) return;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m = l;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == kMaxQlSweeps) throw ConvergenceError("sym_eig: QL iteration cap exceeded");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        int i = m - 1;
        for (; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          e[i + 1] = (r = std::hypot(f, g));
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          d[i + 1] = g + (p = s * r);
          g = c * r - b;
          if (z != nullptr) {
            for (int k = 0; k < n; ++k) {
              f = (*z)(k, i + 1);
              (*z)(k, i + 1) = s * (*z)(k, i) + c * f;
              (*z)(k, i) = c * (*z)(k, i) - s * f;
            }
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace

EigenDecomposition sym_eig(const SymMatrix& s) {
  const std::size_t n = s.dim();
  Matrix z = s.matrix();
  Vector d(n), e(n);
  tridiagonalize(z, d, e, true);
  tridiagonal_ql(d, e, &z);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = d[order[k]];
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = z(r, order[k]);
  }
  return out;
}

Vector sym_eigvals(const SymMatrix& s) {
  const std::size_t n = s.dim();
  Matrix a = s.matrix();
  Vector d(n), e(n);
  tridiagonalize(a, d, e, false);
  tridiagonal_ql(d, e, nullptr);
  std::sort(d.begin(), d.end());
  return d;
}

double sym_max_eig(const SymMatrix& s) {
  if (s.dim() == 0) throw ShapeError("sym_max_eig: empty matrix");
  return sym_eigvals(s).back();
}

double sym_min_eig(const SymMatrix& s) {
  if (s.dim() == 0) throw ShapeError("sym_min_eig: empty matrix");
  return sym_eigvals(s).front();
}

double spectral_norm(const Matrix& a) {
  if (a.empty()) throw ShapeError("spectral_norm: empty matrix");
  if (!a.all_finite()) throw NonFinite("spectral_norm: non-finite entry");
  if (a.is_zero()) return 0.0;
  // Prescale so the Gram matrix cannot overflow.
  const double scale = a.max_abs();
  Matrix b = (1.0 / scale) * a;
  const Matrix gram = a.rows() <= a.cols() ? kernels::gemm_nt(b, b) : kernels::gemm_tn(b, b);
  const double top = sym_max_eig(SymMatrix(gram));
  return scale * std::sqrt(std::max(top, 0.0));
}

std::optional<Cholesky> Cholesky::factor(const SymMatrix& s) {
  Matrix l = s.matrix();
  if (!kernels::cholesky_in_place(l)) return std::nullopt;
  return Cholesky(std::move(l));
}

Matrix Cholesky::solve_lower(const Matrix& b) const {
  const std::size_t n = l_.rows();
  if (b.rows() != n) throw ShapeError("cholesky solve: right-hand side has wrong row count");
  Matrix y = b;
  for (std::size_t i = 0; i < n; ++i) {
    auto yi = y.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l_(i, k);
      if (lik == 0.0) continue;
      const auto yk = y.row(k);
      for (std::size_t j = 0; j < yi.size(); ++j) yi[j] -= lik * yk[j];
    }
    const double inv = 1.0 / l_(i, i);
    for (double& v : yi) v *= inv;
  }
  return y;
}

Matrix Cholesky::solve(const Matrix& b) const {
  const std::size_t n = l_.rows();
  Matrix x = solve_lower(b);
  for (std::size_t ii = n; ii-- > 0;) {
    auto xi = x.row(ii);
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = l_(k, ii);
      if (lki == 0.0) continue;
      const auto xk = x.row(k);
      for (std::size_t j = 0; j < xi.size(); ++j) xi[j] -= lki * xk[j];
    }
    const double inv = 1.0 / l_(ii, ii);
    for (double& v : xi) v *= inv;
  }
  return x;
}

Matrix Cholesky::inverse() const {
  Matrix inv = solve(Matrix::identity(l_.rows()));
  return SymMatrix(std::move(inv)).matrix();
}

double Cholesky::log_det() const {
  double s = 0.0;
  for (std::size_t i = 0; i < l_.rows(); ++i) s += std::log(l_(i, i));
  return 2.0 * s;
}

double pd_tolerance(const SymMatrix& s) {
  if (s.dim() == 0) return 1e-9;
  const Vector ev = sym_eigvals(s);
  const double norm = std::max(std::abs(ev.front()), std::abs(ev.back()));
  return 1e-9 * std::max(1.0, norm);
}

PdReport check_pd(const SymMatrix& s, std::optional<double> tol, bool exact_min_eig) {
  PdReport report;
  report.tolerance = tol.value_or(pd_tolerance(s));
  Matrix shifted = s.matrix();
  for (std::size_t i = 0; i < s.dim(); ++i) shifted(i, i) -= report.tolerance;
  auto chol = Cholesky::factor(SymMatrix(std::move(shifted)));
  if (chol && !exact_min_eig) {
    // lambda_min(S - tol I) = 1/||L^{-1}||_2^2 >= 1/||L^{-1}||_F^2
    const Matrix linv = chol->solve_lower(Matrix::identity(s.dim()));
    const double f = linv.frobenius_norm();
    report.min_eig = report.tolerance + 1.0 / (f * f);
    report.is_pd = report.min_eig > report.tolerance;
    report.method = PdMethod::cholesky;
    return report;
  }
  report.min_eig = sym_min_eig(s);
  report.is_pd = report.min_eig > report.tolerance;
  report.method = chol ? PdMethod::cholesky : PdMethod::eig;
  return report;
}

Matrix solve_spd(const SymMatrix& m, const Matrix& b) {
  auto chol = Cholesky::factor(m);
  if (!chol) throw NotPositiveDefinite("solve_spd: matrix is not positive definite");
  return chol->solve(b);
}

SymMatrix sym_sqrt_psd(const SymMatrix& s) {
  const std::size_t n = s.dim();
  if (n == 0) return s;
  EigenDecomposition eig = sym_eig(s);
  const double norm = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  if (eig.values.front() < -1e-9 * norm)
    throw NotPsd("sym_sqrt_psd: matrix has a significantly negative eigenvalue");
  Matrix scaled = eig.vectors;
  for (std::size_t k = 0; k < n; ++k) {
    const double root = std::sqrt(std::max(eig.values[k], 0.0));
    for (std::size_t r = 0; r < n; ++r) scaled(r, k) *= root;
  }
  return SymMatrix(kernels::gemm_nt(scaled, eig.vectors));
}

std::optional<SymMatrix> equilibrate(const SymMatrix& s) {
  const std::size_t n = s.dim();
  Vector dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s(i, i) > 0.0)) return std::nullopt;
    dinv[i] = 1.0 / std::sqrt(s(i, i));
  }
  Matrix out = s.matrix();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= dinv[i] * dinv[j];
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return SymMatrix(std::move(out));
}

}  // namespace lipcert
