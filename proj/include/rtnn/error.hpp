#pragma once

#include <stdexcept>
#include <string>

namespace rtnn {

enum class ErrorCode {
  InvalidDimension,
  ShapeMismatch,
  NotRiemannLike,
  IndexOutOfRange,
  DivisionSingularity,
  DensityUnderflow,
  NonFinite,
  DegenerateMetric,
  RejectedInput,
  InvalidArgument,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

/// Library-wide exception; `code()` drives CLI exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDimension: return "invalid dimension";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::NotRiemannLike: return "not Riemann-like";
    case ErrorCode::IndexOutOfRange: return "index out of range";
    case ErrorCode::DivisionSingularity: return "division singularity";
    case ErrorCode::DensityUnderflow: return "density underflow";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::DegenerateMetric: return "degenerate metric";
    case ErrorCode::RejectedInput: return "rejected input";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Io: return "i/o error";
  }
  return "error";
}

}  // namespace rtnn
