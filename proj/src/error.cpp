#include "margeff/error.hpp"

namespace margeff {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::FamilyMismatch: return "FamilyMismatch";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::DegenerateArm: return "DegenerateArm";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace margeff
