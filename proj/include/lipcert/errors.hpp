#pragma once

#include <stdexcept>
#include <string>

namespace lipcert {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  input,         // malformed files, shape mismatches, bad arguments
  numeric,       // factorization / solver breakdown
  verification,  // a certificate did not replay
  timeout,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define LIPCERT_DEFINE_ERROR(Name, Kind)                                      \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

LIPCERT_DEFINE_ERROR(ParseError, input)
LIPCERT_DEFINE_ERROR(ShapeError, input)
LIPCERT_DEFINE_ERROR(ValueError, input)
LIPCERT_DEFINE_ERROR(ArgumentError, input)
LIPCERT_DEFINE_ERROR(IoError, input)
LIPCERT_DEFINE_ERROR(SizeError, input)
LIPCERT_DEFINE_ERROR(NonFinite, numeric)
LIPCERT_DEFINE_ERROR(ConvergenceError, numeric)
LIPCERT_DEFINE_ERROR(NotPositiveDefinite, numeric)
LIPCERT_DEFINE_ERROR(NotPsd, numeric)
LIPCERT_DEFINE_ERROR(NumericError, numeric)
LIPCERT_DEFINE_ERROR(DegenerateLayer, numeric)
LIPCERT_DEFINE_ERROR(VerificationError, verification)
LIPCERT_DEFINE_ERROR(Timeout, timeout)

#undef LIPCERT_DEFINE_ERROR

/// Raised when a per-layer SDP cannot be solved and no fallback was allowed.
class SolverError : public Error {
 public:
  SolverError(std::size_t layer, const std::string& what)
      : Error(ErrorKind::numeric, "layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

}  // namespace lipcert
