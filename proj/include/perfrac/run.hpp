#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "perfrac/config.hpp"

namespace perfrac {

struct RunOutput {
  std::vector<std::string> files;  // paths written, manifest first
};

/// Executes `config.mode`, writing every artifact under `config.out_dir`.
/// Progress goes to `log` unless `quiet`; warnings always do. Module errors
/// propagate as perfrac::Error.
RunOutput run(const RunConfig& config, std::ostream& log, bool quiet = false);

}  // namespace perfrac
