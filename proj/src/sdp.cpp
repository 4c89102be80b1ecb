#include "lipcert/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "lipcert/errors.hpp"
#include "lipcert/estimators.hpp"
#include "lipcert/spectral.hpp"

namespace lipcert {

LmiTerm LmiTerm::from(Matrix U, Matrix C) {
  if (C.rows() != C.cols() || C.rows() != U.cols()) throw ShapeError("LMI term: C must be r x r for U of width r");
  LmiTerm t{std::move(U), std::move(C), {}};
  for (std::size_t i = 0; i < t.U.rows(); ++i) {
    const auto row = t.U.row(i);
    if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) t.support.push_back(i);
  }
  return t;
}

namespace {

// out += scale * U C U^T restricted to the term's support.
void add_term(Matrix& out, const LmiTerm& t, double scale) {
  if (scale == 0.0) return;
  const std::size_t r = t.U.cols();
  const std::size_t ns = t.support.size();
  Matrix uc(ns, r);  // (U C) on support rows
  for (std::size_t a = 0; a < ns; ++a) {
    const auto urow = t.U.row(t.support[a]);
    for (std::size_t q = 0; q < r; ++q) {
      double s = 0.0;
      for (std::size_t p = 0; p < r; ++p) s += urow[p] * t.C(p, q);
      uc(a, q) = s;
    }
  }
  for (std::size_t a = 0; a < ns; ++a) {
    for (std::size_t b = 0; b < ns; ++b) {
      out(t.support[a], t.support[b]) += scale * dot(uc.row(a), t.U.row(t.support[b]));
    }
  }
}

}  // namespace

SymMatrix LmiProblem::coefficient(std::size_t k) const {
  Matrix out(dim, dim);
  add_term(out, terms.at(k), 1.0);
  return SymMatrix(std::move(out));
}

SymMatrix LmiProblem::evaluate(std::span<const double> x) const {
  if (x.size() != terms.size()) throw ShapeError("LMI evaluate: wrong number of variables");
  Matrix out = F0.matrix();
  for (std::size_t k = 0; k < terms.size(); ++k) add_term(out, terms[k], x[k]);
  return SymMatrix(std::move(out));
}

// derivatives -----------------------------------------------------------------

namespace {

// Y = B U using only U's support rows.
Matrix times_term(const Matrix& b, const LmiTerm& t) {
  const std::size_t dim = b.rows();
  const std::size_t r = t.U.cols();
  Matrix y(dim, r);
  for (std::size_t i = 0; i < dim; ++i) {
    auto yrow = y.row(i);
    for (std::size_t s : t.support) {
      const double bis = b(i, s);
      if (bis == 0.0) continue;
      const auto urow = t.U.row(s);
      for (std::size_t q = 0; q < r; ++q) yrow[q] += bis * urow[q];
    }
  }
  return y;
}

// Z = U_j^T Y_k over U_j's support rows.
Matrix project(const LmiTerm& tj, const Matrix& yk) {
  Matrix z(tj.U.cols(), yk.cols());
  for (std::size_t s : tj.support) {
    const auto urow = tj.U.row(s);
    const auto yrow = yk.row(s);
    for (std::size_t a = 0; a < urow.size(); ++a) {
      const double u = urow[a];
      if (u == 0.0) continue;
      auto zrow = z.row(a);
      for (std::size_t b = 0; b < yrow.size(); ++b) zrow[b] += u * yrow[b];
    }
  }
  return z;
}

// tr(C_j Z C_k Z^T)
double pair_trace(const Matrix& cj, const Matrix& z, const Matrix& ck) {
  const Matrix czc = kernels::serial::gemm(kernels::serial::gemm(cj, z), ck);
  return dot(czc.values(), z.values());
}

void hessian_row(const LmiProblem& prob, const std::vector<Matrix>& y, std::size_t j, BarrierDerivatives& out) {
  const LmiTerm& tj = prob.terms[j];
  for (std::size_t k = j; k < prob.terms.size(); ++k) {
    const Matrix z = project(tj, y[k]);
    if (k == j) {
      double g = 0.0;
      for (std::size_t a = 0; a < z.rows(); ++a)
        for (std::size_t b = 0; b < z.cols(); ++b) g += tj.C(a, b) * z(b, a);
      out.grad[j] = g;
    }
    const double h = pair_trace(tj.C, z, prob.terms[k].C);
    out.hess(j, k) = h;
    out.hess(k, j) = h;
  }
}

}  // namespace

BarrierDerivatives barrier_derivatives(const LmiProblem& prob, const Matrix& inverse, kernels::Exec exec) {
  const std::size_t n = prob.n_vars();
  std::vector<Matrix> y(n);
  BarrierDerivatives out{Vector(n, 0.0), Matrix(n, n)};

  std::size_t work = 0;
  for (const auto& t : prob.terms) work += prob.dim * t.support.size() * t.U.cols();
  const bool par = exec == kernels::Exec::parallel ||
                   (exec == kernels::Exec::automatic && kernels::openmp_enabled() && kernels::max_threads() > 1 &&
                    work >= kernels::kParallelThreshold);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  if (par) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < nn; ++k) y[k] = times_term(inverse, prob.terms[k]);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < nn; ++j) hessian_row(prob, y, static_cast<std::size_t>(j), out);
  } else {
    for (std::size_t k = 0; k < n; ++k) y[k] = times_term(inverse, prob.terms[k]);
    for (std::size_t j = 0; j < n; ++j) hessian_row(prob, y, j, out);
  }
  return out;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numeric: return "numeric";
  }
  return "unknown";
}

// barrier method --------------------------------------------------------------

namespace {

std::optional<Cholesky> factor_at(const LmiProblem& prob, std::span<const double> x) {
  try {
    return Cholesky::factor(prob.evaluate(x));
  } catch (const Error&) {
    return std::nullopt;  // non-finite iterate
  }
}

// Solves H d = rhs for the PSD Newton matrix, with diagonal scaling and a
// growing ridge if the factorization breaks down.
std::optional<Vector> newton_direction(const Matrix& h, const Vector& rhs) {
  const std::size_t n = h.rows();
  Vector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(h(i, i) > 0.0) || !std::isfinite(h(i, i))) return std::nullopt;
    d[i] = 1.0 / std::sqrt(h(i, i));
  }
  Matrix hs(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) hs(i, j) = d[i] * h(i, j) * d[j];
  Matrix b(n, 1);
  for (std::size_t i = 0; i < n; ++i) b(i, 0) = d[i] * rhs[i];

  for (double ridge = 0.0; ridge <= 1e-4; ridge = ridge == 0.0 ? 1e-14 : ridge * 100.0) {
    Matrix shifted = hs;
    for (std::size_t i = 0; i < n; ++i) shifted(i, i) += ridge;
    auto chol = Cholesky::factor(SymMatrix(std::move(shifted)));
    if (!chol) continue;
    const Matrix y = chol->solve(b);
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = d[i] * y(i, 0);
    return out;
  }
  return std::nullopt;
}

}  // namespace

SdpSolution maximize(const LmiProblem& prob, Vector start, const BarrierOptions& opt, const StopRule& stop) {
  const std::size_t n = prob.n_vars();
  if (start.size() != n) throw ShapeError("barrier: start has wrong number of variables");
  if (prob.objective.size() != n) throw ShapeError("barrier: objective has wrong number of variables");
  auto chol = factor_at(prob, start);
  if (!chol) throw ArgumentError("barrier: start point is not strictly feasible");

  SdpSolution sol;
  sol.x = start;
  sol.objective = dot(prob.objective, start);
  sol.margin = sym_min_eig(prob.evaluate(start));
  sol.status = SolveStatus::max_iter;
  if (!(sol.margin > 0.0)) throw ArgumentError("barrier: start point is not strictly feasible");

  Vector x = std::move(start);
  double t = opt.t0;
  const double dim = static_cast<double>(prob.dim);

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    bool stalled = false;
    for (int it = 0; it < opt.max_newton; ++it) {
      opt.deadline.check("barrier solver");
      const BarrierDerivatives der = barrier_derivatives(prob, chol->inverse(), opt.exec);
      // minimize psi(x) = -t obj.x - log det A(x)
      Vector g(n);
      for (std::size_t k = 0; k < n; ++k) g[k] = -t * prob.objective[k] - der.grad[k];
      Vector neg_g(n);
      for (std::size_t k = 0; k < n; ++k) neg_g[k] = -g[k];
      const auto delta = newton_direction(der.hess, neg_g);
      if (!delta) {
        stalled = true;
        break;
      }
      const double slope = dot(g, *delta);
      if (!std::isfinite(slope) || slope > 0.0) {
        stalled = true;
        break;
      }
      if (-slope / 2.0 <= opt.newton_tol) break;

      const double psi0 = -t * dot(prob.objective, x) - chol->log_det();
      bool accepted = false;
      Vector xn(n);
      for (double s = 1.0; s > 1e-20; s *= opt.backtrack) {
        for (std::size_t k = 0; k < n; ++k) xn[k] = x[k] + s * (*delta)[k];
        auto cn = factor_at(prob, xn);
        if (!cn) continue;
        const double psin = -t * dot(prob.objective, xn) - cn->log_det();
        if (psin <= psi0 + opt.armijo * s * slope) {
          x = xn;
          chol = std::move(cn);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        // no progress possible at this t; the iterate is still feasible
        break;
      }
      ++sol.newton_steps;
    }

    const double value = dot(prob.objective, x);
    const double gap = dim / t;
    sol.history.push_back(value);
    bool last_is_best = false;
    if (value >= sol.objective) {
      const double margin = sym_min_eig(prob.evaluate(x));
      if (margin > 0.0) {
        sol.x = x;
        sol.objective = value;
        sol.margin = margin;
        last_is_best = true;
      }
    }
    if (stalled) {
      sol.status = SolveStatus::numeric;
      break;
    }
    const bool done = stop ? stop(value, gap) : gap < opt.tol * std::abs(value);
    if (done) {
      sol.status = last_is_best ? SolveStatus::converged : SolveStatus::numeric;
      break;
    }
    t *= opt.mu;
  }
  return sol;
}

// layer problem ---------------------------------------------------------------

LmiProblem build_layer_lmi(const SymMatrix& f_i, const Matrix& w_next) {
  const std::size_t d = f_i.dim();
  if (w_next.cols() != d) throw ShapeError("layer LMI: next weight does not match layer width");
  const SymMatrix s = sym_sqrt_psd(f_i);

  LmiProblem prob;
  prob.dim = 2 * d;
  Matrix f0(2 * d, 2 * d);
  for (std::size_t i = d; i < 2 * d; ++i) f0(i, i) = 1.0;
  prob.F0 = SymMatrix(std::move(f0));

  const Matrix c_lambda{{1.0, 0.5}, {0.5, 0.0}};
  for (std::size_t k = 0; k < d; ++k) {
    Matrix u(2 * d, 2);
    u(k, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) u(d + j, 1) = s(j, k);
    prob.terms.push_back(LmiTerm::from(std::move(u), c_lambda));
  }
  const std::size_t r = w_next.rows();
  Matrix u(2 * d, r);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t q = 0; q < r; ++q) u(a, q) = w_next(q, a);
  prob.terms.push_back(LmiTerm::from(std::move(u), -1.0 * Matrix::identity(r)));

  prob.objective.assign(d + 1, 0.0);
  prob.objective[d] = 1.0;
  return prob;
}

LmiProblem build_layer_lmi(const Matrix& w_i, const SymMatrix& m_prev, const Matrix& w_next) {
  return build_layer_lmi(next_F(w_i, {0, m_prev, {}}), w_next);
}

std::pair<Vector, double> feasible_start(const SymMatrix& f_i, const Matrix& w_next) {
  const double sigma = sym_max_eig(f_i);
  if (!(sigma > 0.0)) throw DegenerateLayer("feasible_start: F_i vanishes");
  const double wn = spectral_norm(w_next);
  return {Vector(f_i.dim(), 2.0 / sigma), 0.9 / (sigma * wn * wn)};
}

std::pair<Vector, double> feasible_start(const Matrix& w_i, const SymMatrix& m_prev, const Matrix& w_next) {
  return feasible_start(next_F(w_i, {0, m_prev, {}}), w_next);
}

Vector layer_point(std::span<const double> lambda, double c) {
  Vector x(lambda.begin(), lambda.end());
  x.push_back(c);
  return x;
}

SdpSolution maximize_c(const LmiProblem& prob, Vector start, double tol, BarrierOptions options) {
  options.tol = tol;
  return maximize(prob, std::move(start), options);
}

namespace {

std::size_t objective_index(const LmiProblem& prob) {
  std::optional<std::size_t> idx;
  for (std::size_t k = 0; k < prob.objective.size(); ++k) {
    if (prob.objective[k] == 0.0) continue;
    if (idx || prob.objective[k] != 1.0) throw ArgumentError("bisection needs a single unit objective entry");
    idx = k;
  }
  if (!idx) throw ArgumentError("bisection needs a single unit objective entry");
  return *idx;
}

// Looks for multipliers with A(Lambda, c) > 0 by maximizing s subject to
// A(Lambda, c) - s I > 0. Returns the multipliers when some s > 0 is reached.
std::optional<Vector> probe_feasible(const LmiProblem& prob, std::size_t ci, double c, const Vector& guess,
                                     const BarrierOptions& opt, int& steps) {
  LmiProblem probe;
  probe.dim = prob.dim;
  Matrix f0 = prob.F0.matrix();
  f0 += c * prob.coefficient(ci).matrix();
  probe.F0 = SymMatrix(std::move(f0));
  for (std::size_t k = 0; k < prob.n_vars(); ++k)
    if (k != ci) probe.terms.push_back(prob.terms[k]);
  probe.terms.push_back(LmiTerm::from(Matrix::identity(prob.dim), -1.0 * Matrix::identity(prob.dim)));
  probe.objective.assign(probe.terms.size(), 0.0);
  probe.objective.back() = 1.0;

  Vector start = guess;
  std::vector<double> lambda_only;
  for (std::size_t k = 0; k < start.size(); ++k)
    if (k != ci) lambda_only.push_back(start[k]);
  lambda_only.push_back(0.0);
  const double base = sym_min_eig(probe.evaluate(lambda_only));
  lambda_only.back() = base - 1.0;

  const auto stop = [](double value, double gap) {
    return value > 0.0 || value + gap < 0.0 || gap < 1e-13 * (1.0 + std::abs(value));
  };
  const SdpSolution sol = maximize(probe, lambda_only, opt, stop);
  steps += sol.newton_steps;
  if (!(sol.objective > 0.0)) return std::nullopt;
  Vector x(prob.n_vars());
  std::size_t src = 0;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = k == ci ? c : sol.x[src++];
  return x;
}

}  // namespace

SdpSolution maximize_c_bisection(const LmiProblem& prob, Vector start, double tol, BarrierOptions options) {
  const std::size_t ci = objective_index(prob);
  if (!factor_at(prob, start)) throw ArgumentError("bisection: start point is not strictly feasible");

  SdpSolution sol;
  sol.status = SolveStatus::converged;
  Vector best = start;
  double lo = start[ci];
  if (!(lo > 0.0)) throw ArgumentError("bisection: start needs c > 0");
  double hi = 2.0 * lo;
  int doublings = 0;
  for (;;) {
    options.deadline.check("bisection");
    auto found = probe_feasible(prob, ci, hi, best, options, sol.newton_steps);
    if (!found) break;
    best = *found;
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) throw NumericError("bisection: no upper bound on c found");
  }
  while (hi - lo > tol * lo) {
    options.deadline.check("bisection");
    const double mid = 0.5 * (lo + hi);
    if (auto found = probe_feasible(prob, ci, mid, best, options, sol.newton_steps)) {
      best = *found;
      lo = mid;
    } else {
      hi = mid;
    }
    sol.history.push_back(lo);
  }
  sol.x = best;
  sol.objective = lo;
  sol.margin = sym_min_eig(prob.evaluate(best));
  return sol;
}

// joint problem ---------------------------------------------------------------

LmiProblem build_joint_lmi(const Network& net, JointVariant variant) {
  const std::size_t l = net.depth();
  const double p = net.activation().p();
  const double m = net.activation().m();
  std::vector<std::size_t> offsets;
  std::size_t dim = 0;
  for (std::size_t k = 0; k < l; ++k) {
    offsets.push_back(dim);
    dim += net.weight(k).cols();
  }

  LmiProblem prob;
  prob.dim = dim;
  Matrix f0(dim, dim);
  for (std::size_t r = 0; r < net.input_dim(); ++r) f0(r, r) = 1.0;
  prob.F0 = SymMatrix(std::move(f0));

  for (std::size_t i = 1; i < l; ++i) {
    const Matrix& w = net.weight(i - 1);  // d_i x d_{i-1}
    const std::size_t di = w.rows();
    const std::size_t dprev = w.cols();
    if (variant == JointVariant::neuron) {
      const Matrix c{{1.0, -m}, {-m, p}};
      for (std::size_t r = 0; r < di; ++r) {
        Matrix u(dim, 2);
        u(offsets[i] + r, 0) = 1.0;
        for (std::size_t a = 0; a < dprev; ++a) u(offsets[i - 1] + a, 1) = w(r, a);
        prob.terms.push_back(LmiTerm::from(std::move(u), c));
      }
    } else {
      Matrix u(dim, 2 * di);
      Matrix c(2 * di, 2 * di);
      for (std::size_t r = 0; r < di; ++r) {
        u(offsets[i] + r, r) = 1.0;
        for (std::size_t a = 0; a < dprev; ++a) u(offsets[i - 1] + a, di + r) = w(r, a);
        c(r, r) = 1.0;
        c(r, di + r) = -m;
        c(di + r, r) = -m;
        c(di + r, di + r) = p;
      }
      prob.terms.push_back(LmiTerm::from(std::move(u), std::move(c)));
    }
  }
  const Matrix& wl = net.weight(l - 1);
  Matrix u(dim, wl.rows());
  for (std::size_t a = 0; a < wl.cols(); ++a)
    for (std::size_t q = 0; q < wl.rows(); ++q) u(offsets[l - 1] + a, q) = wl(q, a);
  prob.terms.push_back(LmiTerm::from(std::move(u), -1.0 * Matrix::identity(wl.rows())));
  prob.objective.assign(prob.terms.size(), 0.0);
  prob.objective.back() = 1.0;
  return prob;
}

Certificate solve_joint_lipsdp(const Network& net, JointVariant variant, double tol, std::size_t cap,
                               Deadline deadline) {
  const Algo algo = variant == JointVariant::neuron ? Algo::joint_neuron : Algo::joint_layer;
  if (!net.activation().is_unit_slope())
    throw ArgumentError("joint LipSDP warm start requires slope bounds (0, 1)");
  if (net.monolithic_dim() > cap)
    throw SizeError("joint LipSDP: dimension " + std::to_string(net.monolithic_dim()) + " exceeds cap " +
                    std::to_string(cap) + "; use the fast estimator");
  if (net.depth() == 1) {
    return Certificate::make(algo, {}, final_bound(net.weight(0), initial_state(net.input_dim())));
  }

  EstimateOptions fast_opts;
  fast_opts.algo = Algo::fast;
  fast_opts.verify = false;
  fast_opts.deadline = deadline;
  const Certificate warm = estimate(net, fast_opts);

  const LmiProblem prob = build_joint_lmi(net, variant);
  Vector start;
  for (const auto& lam : warm.lambdas) {
    if (variant == JointVariant::neuron)
      start.insert(start.end(), lam.begin(), lam.end());
    else
      start.push_back(lam.front());
  }
  start.push_back(0.5 / warm.inv_F);

  BarrierOptions opts;
  opts.tol = tol;
  opts.deadline = deadline;
  const SdpSolution sol = maximize(prob, start, opts);
  // pull the optimum off the PD boundary toward the strictly feasible warm start
  constexpr double kBlend = 1e-6;
  Vector x(sol.x.size());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (1.0 - kBlend) * sol.x[j] + kBlend * start[j];

  std::vector<Vector> lambdas;
  std::size_t k = 0;
  for (std::size_t i = 1; i < net.depth(); ++i) {
    const std::size_t di = net.weight(i - 1).rows();
    if (variant == JointVariant::neuron) {
      lambdas.emplace_back(x.begin() + static_cast<std::ptrdiff_t>(k),
                           x.begin() + static_cast<std::ptrdiff_t>(k + di));
      k += di;
    } else {
      lambdas.emplace_back(di, x[k++]);
    }
  }
  // exact bound for the returned multipliers; never looser than 1/F*
  CascadeState state = initial_state(net.input_dim());
  for (std::size_t i = 1; i < net.depth(); ++i) state = advance(net.weight(i - 1), lambdas[i - 1], state);
  const double inv_F = std::min(1.0 / x.back(), final_bound(net.weight(net.depth() - 1), state));
  Certificate cert = Certificate::make(algo, std::move(lambdas), inv_F);
  const MonolithicReport check = verify_monolithic(net, cert, 1e-6, std::max(cap, net.monolithic_dim()));
  if (!check.ok) throw NumericError("joint LipSDP solution failed monolithic verification");
  return cert;
}

}  // namespace lipcert
