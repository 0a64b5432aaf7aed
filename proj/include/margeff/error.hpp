#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace margeff {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  NonConvergence,
  SingularDesign,
  FamilyMismatch,
  BracketFailure,
  NoOverlap,
  DegenerateArm,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the engine; callers branch on kind().
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// True for failures caused by the data or the numerics (as opposed to bad input).
inline bool is_numerical(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonConvergence:
    case ErrorKind::SingularDesign:
    case ErrorKind::BracketFailure:
    case ErrorKind::NoOverlap:
    case ErrorKind::DegenerateArm:
      return true;
    default:
      return false;
  }
}

}  // namespace margeff
