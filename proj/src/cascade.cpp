#include "lipcert/cascade.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "lipcert/errors.hpp"
#include "lipcert/kernels.hpp"
#include "lipcert/spectral.hpp"

namespace lipcert {

CascadeState initial_state(std::size_t input_dim) {
  return {0, SymMatrix::identity(input_dim), SymMatrix{}};
}

SymMatrix next_F(const Matrix& w_next, const CascadeState& state) {
  if (w_next.cols() != state.M.dim()) throw ShapeError("next_F: weight columns do not match M");
  auto chol = Cholesky::factor(state.M);
  if (!chol) throw NotPositiveDefinite("M_" + std::to_string(state.stage) + " is not positive definite");
  // W M^{-1} W^T = (L^{-1} W^T)^T (L^{-1} W^T)
  const Matrix y = chol->solve_lower(w_next.transpose());
  return SymMatrix(kernels::gemm_tn(y, y));
}

SymMatrix next_M(std::span<const double> lambda, const SymMatrix& f) {
  const std::size_t n = f.dim();
  if (lambda.size() != n) throw ShapeError("next_M: multiplier count does not match F");
  for (double v : lambda)
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("next_M: multipliers must be positive and finite");
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = -0.25 * lambda[i] * f(i, j) * lambda[j];
      m(i, j) = v;
      m(j, i) = v;
    }
    m(i, i) += lambda[i];
  }
  return SymMatrix(std::move(m));
}

CascadeState advance(const Matrix& w, std::span<const double> lambda, const CascadeState& state) {
  SymMatrix f = next_F(w, state);
  SymMatrix m = next_M(lambda, f);
  return {state.stage + 1, std::move(m), std::move(f)};
}

double final_bound(const Matrix& w_last, const CascadeState& state) {
  // rounded outward by a forward-error allowance for the product and the eigenvalue
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double k = static_cast<double>(state.M.dim() + w_last.rows());
  return sym_max_eig(next_F(w_last, state)) * (1.0 + 4.0 * k * eps);
}

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::fast: return "fast";
    case Algo::sdp: return "sdp";
    case Algo::trivial: return "trivial";
    case Algo::joint_neuron: return "joint_neuron";
    case Algo::joint_layer: return "joint_layer";
  }
  return "unknown";
}

Algo algo_from_string(const std::string& name) {
  if (name == "fast") return Algo::fast;
  if (name == "sdp") return Algo::sdp;
  if (name == "trivial") return Algo::trivial;
  if (name == "joint_neuron" || name == "joint-neuron") return Algo::joint_neuron;
  if (name == "joint_layer" || name == "joint-layer") return Algo::joint_layer;
  throw ArgumentError("unknown algorithm '" + name + "'");
}

Certificate Certificate::make(Algo algo, std::vector<Vector> lambdas, double inv_F) {
  Certificate c;
  c.algo = algo;
  c.lambdas = std::move(lambdas);
  c.inv_F = inv_F;
  c.L = std::sqrt(inv_F);
  return c;
}

nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json j = {{"algo", to_string(cert.algo)},
                      {"lambdas", cert.lambdas},
                      {"inv_F", cert.inv_F},
                      {"L", cert.L}};
  if (cert.c_values) j["c_values"] = *cert.c_values;
  if (!cert.fallback_layers.empty()) j["fallback_layers"] = cert.fallback_layers;
  return j;
}

Certificate certificate_from_json(const nlohmann::json& j) {
  try {
    Certificate c;
    c.algo = algo_from_string(j.at("algo").get<std::string>());
    c.lambdas = j.at("lambdas").get<std::vector<Vector>>();
    c.inv_F = j.at("inv_F").get<double>();
    c.L = j.contains("L") ? j.at("L").get<double>() : std::sqrt(c.inv_F);
    if (j.contains("c_values")) c.c_values = j.at("c_values").get<std::vector<double>>();
    if (j.contains("fallback_layers")) c.fallback_layers = j.at("fallback_layers").get<std::vector<std::size_t>>();
    if (!(c.inv_F > 0.0) || !std::isfinite(c.inv_F)) throw ValueError("certificate inv_F must be positive");
    if (std::abs(c.L - std::sqrt(c.inv_F)) > 1e-14 * std::sqrt(c.inv_F))
      throw ValueError("certificate L does not equal sqrt(inv_F)");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("certificate JSON: ") + e.what());
  }
}

void save_certificate(const Certificate& cert, const std::filesystem::path& path) {
  const std::string text = certificate_to_json(cert).dump(1) + "\n";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

Certificate load_certificate(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return certificate_from_json(j);
}

namespace {

void check_lambda_shapes(const Network& net, const std::vector<Vector>& lambdas) {
  if (lambdas.size() + 1 != net.depth())
    throw ShapeError("certificate has " + std::to_string(lambdas.size()) + " multiplier vectors, network needs " +
                     std::to_string(net.depth() - 1));
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    if (lambdas[i].size() != net.weight(i).rows())
      throw ShapeError("layer " + std::to_string(i + 1) + ": certificate has " + std::to_string(lambdas[i].size()) +
                       " multipliers for " + std::to_string(net.weight(i).rows()) + " neurons");
}

// Equilibrated definiteness check. Returns (is_pd, margin).
std::pair<bool, double> scaled_pd(const SymMatrix& s) {
  auto eq = equilibrate(s);
  if (!eq) return {false, sym_min_eig(s)};
  const PdReport r = check_pd(*eq, std::nullopt, true);
  return {r.is_pd, r.min_eig};
}

}  // namespace

ChainReport verify_chain(const Network& net, const Certificate& cert, double slack) {
  if (!net.activation().is_unit_slope())
    throw ArgumentError("verify_chain: the layer recursion requires slope bounds (0, 1)");
  if (!(slack >= 0.0 && slack < 1.0)) throw ArgumentError("verify_chain: slack must lie in [0, 1)");
  check_lambda_shapes(net, cert.lambdas);

  ChainReport report;
  const std::size_t l = net.depth();
  CascadeState state = initial_state(net.input_dim());
  for (std::size_t i = 1; i < l; ++i) {
    const Vector& lambda = cert.lambdas[i - 1];
    for (double v : lambda) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        report.failed_stage = i;
        return report;
      }
    }
    state = advance(net.weight(i - 1), lambda, state);
    if (i + 1 < l) {
      const auto [pd, margin] = scaled_pd(state.M);
      report.stage_margins.push_back(margin);
      if (!pd) {
        report.failed_stage = i;
        return report;
      }
    }
  }
  // M_{l-1} - F' W_l^T W_l
  const double f = (1.0 - slack) / cert.inv_F;
  const Matrix& wl = net.weight(l - 1);
  Matrix last = state.M.matrix();
  last -= f * kernels::gemm_tn(wl, wl);
  const auto [pd, margin] = scaled_pd(SymMatrix(std::move(last)));
  report.stage_margins.push_back(margin);
  if (!pd) {
    report.failed_stage = l - 1;
    return report;
  }
  report.ok = true;
  return report;
}

MonolithicForm assemble_monolithic(const Network& net, const std::vector<Vector>& lambdas, double F) {
  check_lambda_shapes(net, lambdas);
  const std::size_t l = net.depth();
  const double p = net.activation().p();
  const double m = net.activation().m();

  MonolithicForm form;
  std::size_t total = 0;
  for (std::size_t k = 0; k < l; ++k) {
    form.offsets.push_back(total);
    form.sizes.push_back(net.weight(k).cols());
    total += form.sizes.back();
  }
  Matrix P(total, total);
  for (std::size_t r = 0; r < form.sizes[0]; ++r) P(r, r) = 1.0;

  for (std::size_t i = 1; i < l; ++i) {
    const Matrix& w = net.weight(i - 1);  // d_i x d_{i-1}
    const Vector& lam = lambdas[i - 1];
    const std::size_t prev = form.offsets[i - 1];
    const std::size_t cur = form.offsets[i];
    for (std::size_t r = 0; r < lam.size(); ++r) P(cur + r, cur + r) += lam[r];
    if (p != 0.0) {
      Matrix lw = w;
      for (std::size_t r = 0; r < lw.rows(); ++r)
        for (double& v : lw.row(r)) v *= lam[r];
      const Matrix block = kernels::gemm_tn(w, lw);
      for (std::size_t a = 0; a < block.rows(); ++a)
        for (std::size_t b = 0; b < block.cols(); ++b) P(prev + a, prev + b) += p * block(a, b);
    }
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) {
        const double v = -m * lam[r] * w(r, c);
        P(cur + r, prev + c) = v;
        P(prev + c, cur + r) = v;
      }
    }
  }
  const Matrix& wl = net.weight(l - 1);
  const Matrix gram = kernels::gemm_tn(wl, wl);
  const std::size_t last = form.offsets[l - 1];
  for (std::size_t a = 0; a < gram.rows(); ++a)
    for (std::size_t b = 0; b < gram.cols(); ++b) P(last + a, last + b) -= F * gram(a, b);

  form.P = SymMatrix(std::move(P));
  return form;
}

MonolithicForm assemble_monolithic(const Network& net, const Certificate& cert, double F) {
  return assemble_monolithic(net, cert.lambdas, F);
}

MonolithicReport verify_monolithic(const Network& net, const Certificate& cert, double slack, std::size_t cap) {
  if (!(slack >= 0.0 && slack < 1.0)) throw ArgumentError("verify_monolithic: slack must lie in [0, 1)");
  if (net.monolithic_dim() > cap)
    throw SizeError("monolithic matrix of dimension " + std::to_string(net.monolithic_dim()) + " exceeds cap " +
                    std::to_string(cap));
  const MonolithicForm form = assemble_monolithic(net, cert, (1.0 - slack) / cert.inv_F);
  const auto eq = equilibrate(form.P);
  if (!eq) return {false, sym_min_eig(form.P)};
  const double m = sym_min_eig(*eq);
  return {m > 0.0, m};
}

}  // namespace lipcert
