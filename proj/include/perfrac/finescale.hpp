#pragma once

#include <memory>
#include <vector>

#include "perfrac/cell_homog.hpp"
#include "perfrac/fracture.hpp"

namespace perfrac {

// The fine-scale model is the fracture model posed on the perforated domain
// with the identity tensor; hole boundaries carry natural (Neumann) conditions.

struct FineEnergies {
  double E = 0.0;
  double H = 0.0;
};

/// Params with the tensor forced to the identity.
ModelParams fine_params(ModelParams params);

FineEnergies fine_energies(const Field& u, const Field& v, const ModelParams& params);

std::shared_ptr<const Mesh> perforated_domain(const MacroDomain& domain, double epsilon, const CellGeometry& geom);

Trajectory fine_evolve(const LoadProgram& load, const ModelParams& params, std::shared_ptr<const Mesh> perforated,
                       const StepObserver& observer = {});
Trajectory fine_evolve(const LoadProgram& load, const ModelParams& params, std::shared_ptr<const Mesh> perforated,
                       const Field& v_init, const StepObserver& observer = {});

/// Largest |(K(v) u)_i| over hole nodes that are not on the outer boundary,
/// i.e. the discrete normal flux left on the hole edges.
double hole_flux_residual(const Field& u, const Field& v, const ModelParams& params);

struct ErrorReport {
  double epsilon = 0.0;
  double relL2_u = 0.0;
  double relL2_u_corrected = 0.0;
  double relH1semi_u = 0.0;
  double relH1semi_u_corrected = 0.0;
  double relL2_v = 0.0;
  double relH1semi_v = 0.0;
};

/// Nodal values of a P1 macro field at the nodes of another mesh.
Field transfer(const Field& source, std::shared_ptr<const Mesh> target);

/// Relative errors of the fine solution against the homogenized one carried
/// onto the perforated nodes, plain and with the first-order corrector.
ErrorReport compare_to_homog(const Field& fine_u, const Field& fine_v, const Field& homog_u, const Field& homog_v,
                             const CorrectorBasis& basis, double epsilon);

struct SweepSetup {
  MacroDomain domain;  // resolution is the homogenized mesh resolution
  CellGeometry cell;   // resolution is per cell, both for the correctors and the fine tiles
  std::vector<double> epsilons{0.25, 0.125, 0.0625};
  ModelParams params;  // tensor is ignored: M0 for the homogenized run, I for the fine ones
};

struct SweepResult {
  HomogTensor tensor;
  Trajectory homog;
  std::vector<Trajectory> fine;     // one per epsilon
  std::vector<ErrorReport> errors;  // one per epsilon, at the final pseudo-time
};

/// Homogenization study: one homogenized run, then independent fine runs
/// (in parallel) compared against it at s = 1.
SweepResult homogenization_sweep(const SweepSetup& setup, const LoadProgram& load);

}  // namespace perfrac
