#include "gmclab/error.hpp"

namespace gmclab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DiagonalSingularity: return "DiagonalSingularity";
    case ErrorCode::QuadratureUnstable: return "QuadratureUnstable";
    case ErrorCode::InvalidResolution: return "InvalidResolution";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularShift: return "SingularShift";
    case ErrorCode::RegionMismatch: return "RegionMismatch";
    case ErrorCode::DegenerateStart: return "DegenerateStart";
    case ErrorCode::IndexMismatch: return "IndexMismatch";
    case ErrorCode::TruncationTooShort: return "TruncationTooShort";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::DegenerateWindow: return "DegenerateWindow";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::GeometryViolation: return "GeometryViolation";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace gmclab
