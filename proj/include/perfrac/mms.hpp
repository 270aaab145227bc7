#pragma once

#include <vector>

namespace perfrac {

/// One level of the manufactured-solution study: -lap u = f on the unit
/// square with u = sin(pi x) sin(pi y), homogeneous Dirichlet data.
struct MmsLevel {
  int n = 0;
  double h = 0.0;
  double l2_error = 0.0;
  double h1_error = 0.0;  // gradient seminorm
  double l2_rate = 0.0;   // observed order against the previous level; 0 on the first
  double h1_rate = 0.0;
};

std::vector<MmsLevel> mms_study(const std::vector<int>& levels, double solver_tol = 1e-12);

}  // namespace perfrac
