#pragma once

#include <array>
#include <memory>
#include <vector>

#include "perfrac/fem.hpp"

namespace perfrac {

/// Periodic correctors z_1, z_2 on the perforated unit cell Y, gauged to zero mean.
struct CorrectorBasis {
  std::shared_ptr<const Mesh> mesh;
  std::array<Field, 2> z;
  std::vector<std::array<Vec2, 2>> gradients;  // per triangle: grad z_1, grad z_2
  double volume = 0.0;                         // |Y| as the summed triangle area
};

struct HomogTensor {
  Mat2 m0;                  // effective tensor (symmetrized flux form)
  double cell_volume = 0.0;
  double identity_residual = 0.0;  // max |M0_flux - M0_energy|
  double skew = 0.0;               // max |M0_flux - M0_flux^T| / 2
  Mat2 flux_form;    // I - (1/|Y|) int J_y Z^t
  Mat2 energy_form;  // I - (1/|Y|) int J_y Z J_y Z^t
};

CorrectorBasis solve_cell_problems(std::shared_ptr<const Mesh> cell_mesh, double tol = 1e-12);

/// Throws IDENTITY_VIOLATION when the two formulas for M0 disagree by more than `identity_tol`.
HomogTensor homogenized_tensor(const CorrectorBasis& basis, double identity_tol = 1e-7);

/// Nodal interpolant of u0(x) - eps * sum_i z_i(x/eps) d_i u0(x) on the perforated mesh.
/// The cell lattice is anchored at the lower-left corner of the macro mesh.
Field reconstruct_corrector(const Field& u0, const CorrectorBasis& basis, double epsilon,
                            std::shared_ptr<const Mesh> perforated);

}  // namespace perfrac
