#pragma once

// End-to-end Lipschitz estimators on top of the layer recursion, plus a
// sampling lower bound used to test soundness.

#include <cstdint>
#include <span>
#include <vector>

#include "lipcert/cascade.hpp"
#include "lipcert/deadline.hpp"
#include "lipcert/kernels.hpp"
#include "lipcert/network.hpp"

namespace lipcert {

struct EstimateOptions {
  Algo algo = Algo::fast;
  double sdp_tol = 1e-8;
  double slack = 1e-6;
  bool verify = true;  // replay the chain before returning
  /// On a per-layer solver failure use the closed-form multipliers for that
  /// layer (recorded in fallback_layers) instead of throwing SolverError.
  bool allow_fallback = true;
  bool bisection = false;  // per-layer solves through the bisection backend
  std::size_t joint_cap = 300;
  Deadline deadline;
};

/// Product of spectral norms.
Certificate estimate_trivial(const Network& net);

/// Closed-form multipliers lambda_i = 2 / lambda_max(F_i).
Certificate estimate_fast(const Network& net, const EstimateOptions& opts = {});

/// Multipliers from the per-layer c-maximization, warm-started at the
/// closed-form point.
Certificate estimate_sdp(const Network& net, const EstimateOptions& opts = {});

/// Dispatches on opts.algo. Throws VerificationError if opts.verify and the
/// chain replay fails.
Certificate estimate(const Network& net, const EstimateOptions& opts = {});

/// Product of the estimates of consecutive sub-networks with the given layer
/// counts. Throws ArgumentError unless the counts are positive and sum to the depth.
double split_compose(const Network& net, std::span<const std::size_t> split_sizes, Algo base,
                     EstimateOptions opts = {});

/// Slope-bounded activation used by the sampler: beta * x for x > 0, alpha * x otherwise.
Vector forward(const Network& net, std::span<const double> z);

struct LowerBoundOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double radius = 10.0;   // inputs uniform in [-radius, radius]^d0
  bool jacobian = true;   // max sigma_max of the masked weight product
  bool quotient = false;  // max ||f(a) - f(b)|| / ||a - b|| over sample pairs
  kernels::Exec exec = kernels::Exec::automatic;
};

struct LowerBoundReport {
  double L_lb = 0.0;
  std::size_t samples = 0;
  Vector argmax_input;  // first input attaining L_lb
};

/// Sample i uses RNG stream i, so the result does not depend on the thread count.
LowerBoundReport empirical_lower_bound(const Network& net, const LowerBoundOptions& opts = {});

}  // namespace lipcert
