#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmclab {

enum class ErrorCode {
  InvalidArgument,
  DiagonalSingularity,
  QuadratureUnstable,
  InvalidResolution,
  NotPositiveDefinite,
  SingularShift,
  RegionMismatch,
  DegenerateStart,
  IndexMismatch,
  TruncationTooShort,
  InvalidRho,
  EmptySample,
  DegenerateWindow,
  Infeasible,
  GeometryViolation,
  ConfigInvalid,
  IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit path) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gmclab
