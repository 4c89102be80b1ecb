#pragma once

// Affine linear matrix inequalities A(x) = F0 + sum_k x_k F_k > 0 and a
// log-det barrier path-following method that maximizes a linear objective
// over them. Coefficients are stored factored, F_k = U_k C_k U_k^T with a
// thin U_k, which is how both the per-layer problems and the monolithic
// certificate matrix are naturally built.

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "lipcert/cascade.hpp"
#include "lipcert/deadline.hpp"
#include "lipcert/kernels.hpp"
#include "lipcert/matrix.hpp"
#include "lipcert/network.hpp"

namespace lipcert {

struct LmiTerm {
  Matrix U;                          // dim x r
  Matrix C;                          // r x r, symmetric
  std::vector<std::size_t> support;  // rows of U with a nonzero entry

  static LmiTerm from(Matrix U, Matrix C);
};

struct LmiProblem {
  std::size_t dim = 0;
  SymMatrix F0;
  std::vector<LmiTerm> terms;  // one per variable
  Vector objective;            // maximize objective . x

  std::size_t n_vars() const noexcept { return terms.size(); }
  /// Dense F_k.
  SymMatrix coefficient(std::size_t k) const;
  SymMatrix evaluate(std::span<const double> x) const;
};

/// Gradient and Hessian of log det A(x): grad_k = tr(A^{-1} F_k) and
/// hess_jk = tr(A^{-1} F_j A^{-1} F_k) (the Hessian of -log det).
struct BarrierDerivatives {
  Vector grad;
  Matrix hess;
};

/// `inverse` is A(x)^{-1}. Rows of the Hessian are independent, which is what
/// the parallel flavour splits on; both flavours agree bitwise.
BarrierDerivatives barrier_derivatives(const LmiProblem& prob, const Matrix& inverse,
                                       kernels::Exec exec = kernels::Exec::automatic);

enum class SolveStatus { converged, max_iter, numeric };

std::string to_string(SolveStatus s);

struct SdpSolution {
  Vector x;
  double objective = 0.0;
  double margin = 0.0;  // lambda_min(A(x)), > 0 whenever x is returned
  int newton_steps = 0;
  SolveStatus status = SolveStatus::numeric;
  std::vector<double> history;  // objective after each centering
};

struct BarrierOptions {
  double t0 = 1.0;
  double mu = 10.0;
  double tol = 1e-8;  // stop when dim / t < tol * |objective|
  double armijo = 0.01;
  double backtrack = 0.5;
  double newton_tol = 1e-10;  // on half the squared Newton decrement
  int max_newton = 100;       // per centering step
  int max_outer = 60;
  Deadline deadline;
  kernels::Exec exec = kernels::Exec::automatic;
};

/// Decides when path following stops, given the current objective value and
/// the duality-gap bound dim / t. Defaults to the relative rule in BarrierOptions.
using StopRule = std::function<bool(double value, double gap)>;

/// Path following on t * objective.x + log det A(x) from a strictly feasible
/// start, t multiplied by `mu` after each damped-Newton centering. The returned
/// point is always strictly feasible; its objective is a lower bound on the
/// supremum. Throws ArgumentError if `start` is not strictly feasible.
SdpSolution maximize(const LmiProblem& prob, Vector start, const BarrierOptions& options = {},
                     const StopRule& stop = {});

// per-layer problem -----------------------------------------------------------

/// Variables (diag Lambda_i, c_i); the LMI is
///   [ Lambda - c W_{i+1}^T W_{i+1}    1/2 Lambda S ]
///   [ 1/2 S Lambda                    I            ]  > 0,  S = F_i^{1/2}.
/// Throws NotPsd if F_i is not numerically PSD.
LmiProblem build_layer_lmi(const SymMatrix& f_i, const Matrix& w_next);
LmiProblem build_layer_lmi(const Matrix& w_i, const SymMatrix& m_prev, const Matrix& w_next);

/// Lambda = (2/sigma) I and c = 0.9 / (sigma * ||W_{i+1}||^2), sigma = lambda_max(F_i):
/// strictly feasible for the layer LMI whenever M_{i-1} > 0.
std::pair<Vector, double> feasible_start(const SymMatrix& f_i, const Matrix& w_next);
std::pair<Vector, double> feasible_start(const Matrix& w_i, const SymMatrix& m_prev, const Matrix& w_next);

/// Packs (lambda, c) into a variable vector.
Vector layer_point(std::span<const double> lambda, double c);

SdpSolution maximize_c(const LmiProblem& prob, Vector start, double tol = 1e-8, BarrierOptions options = {});

/// Cross-check backend: bisection on c; each probe maximizes s subject to
/// A(Lambda, c) - s I > 0 with the same barrier machinery, and c is feasible
/// when some s > 0 is found.
SdpSolution maximize_c_bisection(const LmiProblem& prob, Vector start, double tol = 1e-8,
                                 BarrierOptions options = {});

// joint problem ---------------------------------------------------------------

enum class JointVariant { neuron, layer };

inline constexpr std::size_t kJointCap = 300;

/// Builds the monolithic certificate LMI in variables (multipliers, F) for
/// the network's slope bounds. Neuron variant: one multiplier per hidden
/// neuron; layer variant: one per hidden layer.
LmiProblem build_joint_lmi(const Network& net, JointVariant variant);

/// Maximizes F over the monolithic LMI, warm-started from the closed-form
/// multipliers. Throws SizeError above `cap`, NumericError if the result does
/// not verify.
Certificate solve_joint_lipsdp(const Network& net, JointVariant variant, double tol = 1e-9,
                               std::size_t cap = kJointCap, Deadline deadline = {});

}  // namespace lipcert
