#include "perfrac/error.hpp"

namespace perfrac {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidRadius: return "INVALID_RADIUS";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::MeshDegenerate: return "MESH_DEGENERATE";
    case ErrorCode::TilingMismatch: return "TILING_MISMATCH";
    case ErrorCode::MeshMismatch: return "MESH_MISMATCH";
    case ErrorCode::SingularSystem: return "SINGULAR_SYSTEM";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::InfeasibleBounds: return "INFEASIBLE_BOUNDS";
    case ErrorCode::IdentityViolation: return "IDENTITY_VIOLATION";
    case ErrorCode::PointOutsideDomain: return "POINT_OUTSIDE_DOMAIN";
    case ErrorCode::EnergyIncrease: return "ENERGY_INCREASE";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::ValidationError: return "VALIDATION_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
  }
  return "UNKNOWN";
}

int exit_status(ErrorCode code) { return 10 + static_cast<int>(code); }

}  // namespace perfrac
