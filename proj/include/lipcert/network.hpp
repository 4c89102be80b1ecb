#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "lipcert/matrix.hpp"

namespace lipcert {

/// Slope bounds [alpha, beta] of the elementwise activation.
class ActivationBounds {
 public:
  /// Throws ValueError unless alpha < beta and both are finite.
  ActivationBounds(double alpha, double beta);
  static ActivationBounds relu() { return {0.0, 1.0}; }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double p() const noexcept { return alpha_ * beta_; }
  double m() const noexcept { return 0.5 * (alpha_ + beta_); }
  /// The compositional estimators only handle slope bounds (0, 1).
  bool is_unit_slope() const noexcept { return alpha_ == 0.0 && beta_ == 1.0; }

  friend bool operator==(const ActivationBounds&, const ActivationBounds&) = default;

 private:
  double alpha_;
  double beta_;
};

struct LayerWeights {
  Matrix W;  // d_i x d_{i-1}
  Vector b;  // d_i, stored but never used by the estimators

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

/// Feed-forward network; every layer but the last is followed by the activation.
/// Invariants are checked at construction and the value is immutable afterwards.
class Network {
 public:
  Network(std::vector<LayerWeights> layers, ActivationBounds activation);

  std::size_t depth() const noexcept { return layers_.size(); }
  const LayerWeights& layer(std::size_t i) const { return layers_.at(i); }
  const Matrix& weight(std::size_t i) const { return layers_.at(i).W; }
  const std::vector<LayerWeights>& layers() const noexcept { return layers_; }
  const ActivationBounds& activation() const noexcept { return activation_; }

  /// d_0, d_1, ..., d_l.
  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const { return layers_.front().W.cols(); }
  std::size_t output_dim() const { return layers_.back().W.rows(); }
  /// d_0 + ... + d_{l-1}: the size of the monolithic certificate matrix.
  std::size_t monolithic_dim() const;

  /// Consecutive layers [first, first + count) as a standalone network.
  Network slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<LayerWeights> layers_;
  ActivationBounds activation_;
};

enum class NetFormat { json, ecl_binary };

NetFormat format_from_path(const std::filesystem::path& path);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

/// "ECL1", little-endian u32 layer count, then per layer u32 rows, u32 cols,
/// rows*cols f64 (row-major) and rows f64 of bias. The activation is not part
/// of the format; loading yields slope bounds (0, 1).
std::vector<std::uint8_t> network_to_binary(const Network& net);
Network network_from_binary(std::span<const std::uint8_t> bytes);

Network load_network(const std::filesystem::path& path, NetFormat format);
Network load_network(const std::filesystem::path& path);
void save_network(const Network& net, const std::filesystem::path& path, NetFormat format);
void save_network(const Network& net, const std::filesystem::path& path);

struct NormRange {
  double lo = 0.4;
  double hi = 1.8;
};

/// Seeded random network. Layer i draws its entries i.i.d. standard normal
/// from stream (seed, 2i) and a target spectral norm uniform in [lo, hi] from
/// stream (seed, 2i + 1), then rescales W_i to that norm. Biases are zero and
/// the activation is (0, 1). `dims` lists d_0 .. d_l.
Network random_network(std::span<const std::size_t> dims, std::uint64_t seed, NormRange range = {});

/// depth + 1 entries all equal to `width`.
std::vector<std::size_t> uniform_dims(std::size_t depth, std::size_t width);
/// Input `in`, depth - 1 hidden layers of `width`, output `out` (4 -> ... -> 1 by default).
std::vector<std::size_t> hidden_dims(std::size_t depth, std::size_t width, std::size_t in = 4,
                                     std::size_t out = 1);

}  // namespace lipcert
