#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perfrac/fracture.hpp"
#include "perfrac/geometry.hpp"

namespace perfrac {

enum class RunMode { Cell, HomogRun, FineRun, Validate, Mms };

std::string to_string(RunMode mode);
RunMode parse_mode(std::string_view text);  // throws PARSE_ERROR

/// Fully resolved run configuration. Every field has a default, so an empty
/// document is a valid configuration.
struct RunConfig {
  RunMode mode = RunMode::HomogRun;

  CellGeometry cell{0.25, 32};
  MacroDomain domain{0.0, 1.0, 0.0, 1.0, 64};
  double epsilon = 0.25;  // fine-run cell size

  ModelParams model;
  std::optional<double> m0_scalar;  // isotropic M0 override; otherwise M0 comes from the cell problem

  std::string load_program = "uniaxial";
  double load_amplitude = 1.0;
  double load_offset = 0.5;

  std::string out_dir = "perfrac-out";
  int vtk_stride = 10;  // 0 disables field output
  std::optional<std::array<double, 4>> notch;  // x0, y0, x1, y1

  std::vector<double> validate_epsilons{0.25, 0.125, 0.0625};
  int validate_cell_n = 16;
  int validate_steps = 4;
  double validate_amplitude = 0.5;

  std::vector<int> mms_levels{8, 16, 32, 64};

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  LoadProgram load() const;
};

/// Parses `section.key = value` lines; `#` starts a comment. Unknown keys,
/// malformed lines and repeated keys are PARSE_ERRORs, out-of-range values
/// VALIDATION_ERRORs; both name the key and the line.
RunConfig parse_config(std::string_view text);

/// Range checks shared by the parser and programmatic callers.
void validate_config(const RunConfig& config);

/// Every key with its resolved value, in a form parse_config reads back.
std::string serialize_config(const RunConfig& config);

/// Shortest text that reads back to the same double.
std::string format_number(double x);
/// Fixed 17 significant digits, locale independent (CSV output).
std::string format_csv(double x);

}  // namespace perfrac
