#pragma once

#include <chrono>
#include <optional>

#include "lipcert/errors.hpp"

namespace lipcert {

/// Cooperative time limit, polled between layers and solver stages.
class Deadline {
 public:
  using Clock = std::chrono::steady_clock;

  Deadline() = default;
  static Deadline after(double seconds) {
    Deadline d;
    d.at_ = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
    return d;
  }

  bool expired() const { return at_ && Clock::now() >= *at_; }
  void check(const char* where) const {
    if (expired()) throw Timeout(std::string("time limit reached in ") + where);
  }

 private:
  std::optional<Clock::time_point> at_;
};

}  // namespace lipcert
