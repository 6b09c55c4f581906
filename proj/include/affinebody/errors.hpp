#pragma once

#include <stdexcept>
#include <string>

namespace affinebody {

enum class ErrorCode {
  SingularPlacement,
  DegenerateSpectrum,
  AsymmetricInput,
  TangencyViolation,
  ReprPreconditionViolated,
  NegativeDeterminant,
  FrameMismatch,
  InconsistentInitialData,
  SingularSaddle,
  WindowTooShort,
  IsotropyViolation,
  StepRejected,
  ProjectionFailed,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace affinebody
