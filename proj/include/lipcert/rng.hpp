#pragma once

#include <array>
#include <cstdint>
#include <optional>

namespace lipcert {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// A pure function of (key, counter); no hidden state.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Deterministic random stream: key = seed, counter = (block index, stream id).
///
/// Version "philox4x32-10/polar-v1":
///  - uniform doubles take the top 53 bits of two consecutive 32-bit words
///    (first word high);
///  - normals use the Marsaglia polar method on pairs of uniforms mapped to
///    (-1, 1), returning both variates of an accepted pair in order.
/// Distinct (seed, stream) pairs give independent sequences, which is how
/// per-layer and per-sample streams are derived.
class RandomStream {
 public:
  static constexpr const char* kVersion = "philox4x32-10/polar-v1";

  RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint32_t next_u32() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  /// Uniform in [lo, hi].
  double uniform(double lo, double hi) noexcept;
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  std::optional<double> spare_normal_;
};

}  // namespace lipcert
