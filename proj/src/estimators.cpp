#include "lipcert/estimators.hpp"

#include <cmath>
#include <numeric>

#include "lipcert/errors.hpp"
#include "lipcert/rng.hpp"
#include "lipcert/sdp.hpp"
#include "lipcert/spectral.hpp"

namespace lipcert {

namespace {

void require_unit_slope(const Network& net, const char* who) {
  if (!net.activation().is_unit_slope())
    throw ArgumentError(std::string(who) + ": the layer recursion requires slope bounds (0, 1)");
}

Certificate single_layer(const Network& net, Algo algo) {
  return Certificate::make(algo, {}, final_bound(net.weight(0), initial_state(net.input_dim())));
}

void maybe_verify(const Network& net, const Certificate& cert, const EstimateOptions& opts) {
  if (!opts.verify) return;
  const ChainReport rep = verify_chain(net, cert, opts.slack);
  if (!rep.ok)
    throw VerificationError("certificate failed replay at stage " + std::to_string(rep.failed_stage.value_or(0)));
}

}  // namespace

Certificate estimate_trivial(const Network& net) {
  double prod = 1.0;
  for (const auto& layer : net.layers()) prod *= spectral_norm(layer.W);
  return Certificate::make(Algo::trivial, {}, prod * prod);
}

Certificate estimate_fast(const Network& net, const EstimateOptions& opts) {
  require_unit_slope(net, "estimate_fast");
  if (net.depth() == 1) return single_layer(net, Algo::fast);

  CascadeState state = initial_state(net.input_dim());
  std::vector<Vector> lambdas;
  for (std::size_t i = 1; i < net.depth(); ++i) {
    opts.deadline.check("fast estimator");
    SymMatrix f = next_F(net.weight(i - 1), state);
    const double sigma = sym_max_eig(f);
    if (!(sigma > 0.0)) throw DegenerateLayer("layer " + std::to_string(i) + ": F vanishes");
    Vector lambda(f.dim(), 2.0 / sigma);
    SymMatrix m = next_M(lambda, f);
    state = {i, std::move(m), std::move(f)};
    lambdas.push_back(std::move(lambda));
  }
  Certificate cert = Certificate::make(Algo::fast, std::move(lambdas), final_bound(net.weight(net.depth() - 1), state));
  maybe_verify(net, cert, opts);
  return cert;
}

Certificate estimate_sdp(const Network& net, const EstimateOptions& opts) {
  require_unit_slope(net, "estimate_sdp");
  if (net.depth() == 1) return single_layer(net, Algo::sdp);

  CascadeState state = initial_state(net.input_dim());
  std::vector<Vector> lambdas;
  std::vector<double> c_values;
  std::vector<std::size_t> fallback;
  BarrierOptions bopts;
  bopts.deadline = opts.deadline;

  for (std::size_t i = 1; i < net.depth(); ++i) {
    opts.deadline.check("sdp estimator");
    SymMatrix f = next_F(net.weight(i - 1), state);
    const Matrix& w_next = net.weight(i);
    const auto [lam0, c0] = feasible_start(f, w_next);

    std::optional<SymMatrix> m;
    Vector lambda;
    double c = c0;
    std::string failure;
    try {
      const LmiProblem prob = build_layer_lmi(f, w_next);
      const SdpSolution sol = opts.bisection ? maximize_c_bisection(prob, layer_point(lam0, c0), opts.sdp_tol, bopts)
                                             : maximize_c(prob, layer_point(lam0, c0), opts.sdp_tol, bopts);
      // The optimum may leave M_i singular off the range of W_{i+1}. The LMI is affine,
      // so stepping toward the strictly feasible start restores a usable margin.
      for (double theta : {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
        Vector trial(lam0.size());
        for (std::size_t k = 0; k < trial.size(); ++k) trial[k] = (1.0 - theta) * sol.x[k] + theta * lam0[k];
        SymMatrix candidate = next_M(trial, f);
        const auto eq = equilibrate(candidate);
        if (eq && check_pd(*eq).is_pd) {
          lambda = std::move(trial);
          c = (1.0 - theta) * sol.objective + theta * c0;
          m = std::move(candidate);
          break;
        }
      }
      if (!m) failure = "solver multipliers give M_" + std::to_string(i) + " not positive definite";
    } catch (const Timeout&) {
      throw;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numeric && e.kind() != ErrorKind::input) throw;
      failure = e.what();
    }
    if (!m) {
      if (!opts.allow_fallback) throw SolverError(i, failure);
      lambda = lam0;
      c = c0;
      m = next_M(lambda, f);
      fallback.push_back(i);
    }
    state = {i, std::move(*m), std::move(f)};
    lambdas.push_back(std::move(lambda));
    c_values.push_back(c);
  }
  Certificate cert = Certificate::make(Algo::sdp, std::move(lambdas), final_bound(net.weight(net.depth() - 1), state));
  cert.c_values = std::move(c_values);
  cert.fallback_layers = std::move(fallback);
  maybe_verify(net, cert, opts);
  return cert;
}

Certificate estimate(const Network& net, const EstimateOptions& opts) {
  switch (opts.algo) {
    case Algo::trivial: return estimate_trivial(net);
    case Algo::fast: return estimate_fast(net, opts);
    case Algo::sdp: return estimate_sdp(net, opts);
    case Algo::joint_neuron:
    case Algo::joint_layer: {
      const JointVariant v = opts.algo == Algo::joint_neuron ? JointVariant::neuron : JointVariant::layer;
      Certificate cert = solve_joint_lipsdp(net, v, opts.sdp_tol, opts.joint_cap, opts.deadline);
      maybe_verify(net, cert, opts);
      return cert;
    }
  }
  throw ArgumentError("unknown algorithm");
}

double split_compose(const Network& net, std::span<const std::size_t> split_sizes, Algo base,
                     EstimateOptions opts) {
  if (split_sizes.empty()) throw ArgumentError("split_compose: empty partition");
  std::size_t total = 0;
  for (std::size_t s : split_sizes) {
    if (s == 0) throw ArgumentError("split_compose: sub-network sizes must be positive");
    total += s;
  }
  if (total != net.depth())
    throw ArgumentError("split_compose: sizes sum to " + std::to_string(total) + ", network has " +
                        std::to_string(net.depth()) + " layers");
  opts.algo = base;
  double product = 1.0;
  std::size_t first = 0;
  for (std::size_t s : split_sizes) {
    product *= estimate(net.slice(first, s), opts).L;
    first += s;
  }
  return product;
}

// sampling lower bound --------------------------------------------------------

Vector forward(const Network& net, std::span<const double> z) {
  if (z.size() != net.input_dim()) throw ShapeError("forward: input has wrong dimension");
  const double a = net.activation().alpha();
  const double b = net.activation().beta();
  Vector x(z.begin(), z.end());
  for (std::size_t i = 0; i < net.depth(); ++i) {
    Vector y = matvec(net.weight(i), x);
    const Vector& bias = net.layer(i).b;
    for (std::size_t r = 0; r < y.size(); ++r) y[r] += bias[r];
    if (i + 1 < net.depth())
      for (double& v : y) v = v > 0.0 ? b * v : a * v;
    x = std::move(y);
  }
  return x;
}

namespace {

struct Sample {
  double value = 0.0;
  Vector input;
};

Sample draw(const Network& net, const LowerBoundOptions& opts, std::size_t index) {
  RandomStream rng(opts.seed, index);
  const std::size_t d0 = net.input_dim();
  Vector z(d0);
  for (double& v : z) v = rng.uniform(-opts.radius, opts.radius);

  Sample out{0.0, z};
  if (opts.jacobian) {
    const double a = net.activation().alpha();
    const double b = net.activation().beta();
    Vector x = z;
    Matrix j = net.weight(0);
    for (std::size_t i = 0; i + 1 < net.depth(); ++i) {
      Vector pre = matvec(net.weight(i), x);
      const Vector& bias = net.layer(i).b;
      for (std::size_t r = 0; r < pre.size(); ++r) {
        pre[r] += bias[r];
        const double slope = pre[r] > 0.0 ? b : a;
        pre[r] *= slope;
        for (double& v : j.row(r)) v *= slope;
      }
      x = std::move(pre);
      j = kernels::serial::gemm(net.weight(i + 1), j);
    }
    out.value = spectral_norm(j);
  }
  if (opts.quotient) {
    Vector z2(d0);
    for (double& v : z2) v = rng.uniform(-opts.radius, opts.radius);
    const Vector f1 = forward(net, z);
    const Vector f2 = forward(net, z2);
    Vector df(f1.size()), dz(d0);
    for (std::size_t r = 0; r < f1.size(); ++r) df[r] = f1[r] - f2[r];
    for (std::size_t r = 0; r < d0; ++r) dz[r] = z[r] - z2[r];
    const double den = norm2(dz);
    if (den > 0.0) out.value = std::max(out.value, norm2(df) / den);
  }
  return out;
}

}  // namespace

LowerBoundReport empirical_lower_bound(const Network& net, const LowerBoundOptions& opts) {
  const std::size_t n = opts.samples;
  std::vector<Sample> samples(n);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  const bool par = opts.exec == kernels::Exec::parallel ||
                   (opts.exec == kernels::Exec::automatic && kernels::max_threads() > 1);
  if (par) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t s = 0; s < nn; ++s) samples[s] = draw(net, opts, static_cast<std::size_t>(s));
  } else {
    for (std::size_t s = 0; s < n; ++s) samples[s] = draw(net, opts, s);
  }
  LowerBoundReport report;
  report.samples = n;
  for (auto& s : samples) {
    if (report.argmax_input.empty() || s.value > report.L_lb) {
      report.L_lb = s.value;
      report.argmax_input = std::move(s.input);
    }
  }
  return report;
}

}  // namespace lipcert
