#ifndef CATMAINT_ERROR_HPP
#define CATMAINT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace catmaint {

enum class ErrorCode {
  InvalidArgument,
  GimbalLock,
  ZeroVector,
  ZeroRange,
  InvalidSpec,
  NearSingularPitch,
  SingularInnovation,
  DegenerateCovariance,
  SolverFailure,
  ConstraintViolation,
  Config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::GimbalLock: return "GimbalLock";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ZeroRange: return "ZeroRange";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NearSingularPitch: return "NearSingularPitch";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

// All library failures are reported through this one exception type; the
// code lets callers (the CLI in particular) map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  // message without the code prefix
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace catmaint

#endif  // CATMAINT_ERROR_HPP
