#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perfrac {

enum class ErrorCode {
  InvalidRadius,
  InvalidArgument,
  MeshDegenerate,
  TilingMismatch,
  MeshMismatch,
  SingularSystem,
  NoConvergence,
  InfeasibleBounds,
  IdentityViolation,
  PointOutsideDomain,
  EnergyIncrease,
  ParseError,
  ValidationError,
  IoError,
};

/// Machine-readable upper-case name, e.g. "INVALID_RADIUS".
std::string_view to_string(ErrorCode code);

/// Process exit status used by the command-line driver for each error code.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace perfrac
