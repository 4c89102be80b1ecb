#pragma once

// Layer-by-layer reduction of the LipSDP certificate matrix.
//
// With slope bounds (0, 1) the block tri-diagonal certificate matrix is
// positive definite iff
//
//   M_i > 0 for 1 <= i <= l-2   and   M_{l-1} - F W_l^T W_l > 0,
//
// where M_0 = I and M_i = Lambda_i - 1/4 Lambda_i F_i Lambda_i with
// F_i = W_i M_{i-1}^{-1} W_i^T. The smallest admissible 1/F for fixed
// multipliers is lambda_max(W_l M_{l-1}^{-1} W_l^T), and L = sqrt(1/F).

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lipcert/matrix.hpp"
#include "lipcert/network.hpp"

namespace lipcert {

struct CascadeState {
  std::size_t stage = 0;
  SymMatrix M;  // M_stage, positive definite
  SymMatrix F;  // F_stage = W_stage M_{stage-1}^{-1} W_stage^T; empty at stage 0
};

/// Stage 0: M = I of size d_0.
CascadeState initial_state(std::size_t input_dim);

/// W M^{-1} W^T for the state's M, through its Cholesky factor.
/// Throws NotPositiveDefinite if M is not.
SymMatrix next_F(const Matrix& w_next, const CascadeState& state);

/// Lambda - 1/4 Lambda F Lambda with Lambda = diag(lambda). Exactly symmetric;
/// no definiteness guarantee. Throws ArgumentError on a nonpositive lambda.
SymMatrix next_M(std::span<const double> lambda, const SymMatrix& f);

/// One recursion step: F_{i+1} from W, then M_{i+1} from lambda.
CascadeState advance(const Matrix& w, std::span<const double> lambda, const CascadeState& state);

/// 1/F = lambda_max(W M^{-1} W^T) for the output layer, rounded up by 4(k+n)eps.
double final_bound(const Matrix& w_last, const CascadeState& state);

enum class Algo { fast, sdp, trivial, joint_neuron, joint_layer };

std::string to_string(Algo algo);
/// Accepts "joint_neuron" and "joint-neuron" spellings. Throws ArgumentError.
Algo algo_from_string(const std::string& name);

struct Certificate {
  Algo algo = Algo::fast;
  std::vector<Vector> lambdas;  // diag(Lambda_i), i = 1..l-1; empty for trivial
  double inv_F = 0.0;
  double L = 0.0;  // sqrt(inv_F)
  std::optional<std::vector<double>> c_values;
  std::vector<std::size_t> fallback_layers;  // 1-based layers that used closed-form multipliers

  static Certificate make(Algo algo, std::vector<Vector> lambdas, double inv_F);
};

nlohmann::json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const nlohmann::json& j);
void save_certificate(const Certificate& cert, const std::filesystem::path& path);
Certificate load_certificate(const std::filesystem::path& path);

struct ChainReport {
  bool ok = false;
  /// Smallest eigenvalue of each checked stage matrix after diagonal
  /// equilibration: M_1..M_{l-2}, then M_{l-1} - F' W_l^T W_l.
  std::vector<double> stage_margins;
  /// 1-based stage that failed (l-1 means the output condition).
  std::optional<std::size_t> failed_stage;
};

/// Replays the multiplier recursion at F' = (1 - slack) / cert.inv_F.
/// Throws ShapeError when the multipliers do not match the layer widths.
ChainReport verify_chain(const Network& net, const Certificate& cert, double slack = 1e-6);

struct MonolithicForm {
  SymMatrix P;
  std::vector<std::size_t> offsets;  // block k covers [offsets[k], offsets[k] + sizes[k])
  std::vector<std::size_t> sizes;    // d_0 .. d_{l-1}
};

/// The full certificate matrix for general slope bounds (p, m) taken from the
/// network's activation.
MonolithicForm assemble_monolithic(const Network& net, const std::vector<Vector>& lambdas, double F);
MonolithicForm assemble_monolithic(const Network& net, const Certificate& cert, double F);

struct MonolithicReport {
  bool ok = false;
  double min_eig = 0.0;  // of the diagonally equilibrated matrix
};

inline constexpr std::size_t kMonolithicCap = 2000;

/// Dense eigenvalue check of the monolithic matrix at F' = (1 - slack)/inv_F.
/// Throws SizeError if the matrix dimension exceeds `cap`.
MonolithicReport verify_monolithic(const Network& net, const Certificate& cert, double slack = 1e-6,
                                   std::size_t cap = kMonolithicCap);

}  // namespace lipcert
