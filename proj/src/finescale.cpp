#include "perfrac/finescale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "perfrac/error.hpp"
#include "perfrac/parallel.hpp"

namespace perfrac {

namespace {

Field difference(const Field& a, const Field& b) {
  require_same_mesh(a, b);
  Field d = a;
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
  return d;
}

double relative(double err, double ref) { return ref > 0.0 ? err / ref : err; }

}  // namespace

ModelParams fine_params(ModelParams params) {
  params.tensor = Mat2::identity();
  return params;
}

FineEnergies fine_energies(const Field& u, const Field& v, const ModelParams& params) {
  require_same_mesh(u, v);
  const ModelParams p = fine_params(params);
  return {elastic_energy(u, v, p.eta, p.tensor), surface_energy(v, p.gamma, p.tensor)};
}

std::shared_ptr<const Mesh> perforated_domain(const MacroDomain& domain, double epsilon, const CellGeometry& geom) {
  return std::make_shared<const Mesh>(build_perforated_mesh(domain, epsilon, geom));
}

Trajectory fine_evolve(const LoadProgram& load, const ModelParams& params, std::shared_ptr<const Mesh> perforated,
                       const StepObserver& observer) {
  const Field v_init = Field::constant(perforated, 1.0);
  return fine_evolve(load, params, std::move(perforated), v_init, observer);
}

Trajectory fine_evolve(const LoadProgram& load, const ModelParams& params, std::shared_ptr<const Mesh> perforated,
                       const Field& v_init, const StepObserver& observer) {
  if (!perforated || perforated->region() != Region::Perforated)
    throw Error(ErrorCode::MeshMismatch, "fine runs need a PERFORATED mesh");
  return QuasiStaticSolver(perforated, fine_params(params)).evolve(load, v_init, observer);
}

double hole_flux_residual(const Field& u, const Field& v, const ModelParams& params) {
  require_same_mesh(u, v);
  const Mesh& mesh = *u.mesh;
  Vector weight(v.values.size());
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = v.values[i] * v.values[i] + params.eta;
  const Vector r = StiffnessAssembler(mesh, Mat2::identity()).assemble(weight).apply(u.values);
  const auto hole = mesh.nodes_with_tag(BoundaryTag::Hole);
  const auto outer = mesh.nodes_with_tag(BoundaryTag::Outer);
  double worst = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (hole[i] && !outer[i]) worst = std::max(worst, std::abs(r[i]));
  return worst;
}

Field transfer(const Field& source, std::shared_ptr<const Mesh> target) {
  const Mesh& from = *source.mesh;
  const PointLocator loc(from);
  const double snap = 1e-9 * std::max(1.0, norm(from.max_corner() - from.min_corner()));
  Field out{target, Vector(static_cast<std::size_t>(target->num_nodes()))};
  for (Index i = 0; i < target->num_nodes(); ++i) {
    const auto hit = loc.locate(target->node(i), snap);
    if (!hit) {
      std::ostringstream msg;
      msg << "node (" << target->node(i).x << ", " << target->node(i).y << ") is outside the source mesh";
      throw Error(ErrorCode::PointOutsideDomain, msg.str());
    }
    const auto& tri = from.triangle(hit->triangle);
    out.values[static_cast<std::size_t>(i)] =
        hit->bary[0] * source[tri[0]] + hit->bary[1] * source[tri[1]] + hit->bary[2] * source[tri[2]];
  }
  return out;
}

ErrorReport compare_to_homog(const Field& fine_u, const Field& fine_v, const Field& homog_u, const Field& homog_v,
                             const CorrectorBasis& basis, double epsilon) {
  require_same_mesh(fine_u, fine_v);
  require_same_mesh(homog_u, homog_v);
  if (fine_u.mesh->region() != Region::Perforated || homog_u.mesh->region() != Region::Macro)
    throw Error(ErrorCode::MeshMismatch, "expected fine fields on a PERFORATED mesh and homogenized ones on a MACRO mesh");
  const Vec2 lo = homog_u.mesh->min_corner(), hi = homog_u.mesh->max_corner();
  const double tol = 1e-9 * std::max(1.0, norm(hi - lo));
  if (norm(fine_u.mesh->min_corner() - lo) > tol || norm(fine_u.mesh->max_corner() - hi) > tol)
    throw Error(ErrorCode::MeshMismatch, "fine and homogenized meshes cover different domains");

  const auto& mesh = fine_u.mesh;
  const Field u0 = transfer(homog_u, mesh);
  const Field u1 = reconstruct_corrector(homog_u, basis, epsilon, mesh);
  const Field v0 = transfer(homog_v, mesh);

  ErrorReport rep;
  rep.epsilon = epsilon;
  const double nu = l2_norm(fine_u), gu = h1_seminorm(fine_u);
  rep.relL2_u = relative(l2_norm(difference(fine_u, u0)), nu);
  rep.relL2_u_corrected = relative(l2_norm(difference(fine_u, u1)), nu);
  rep.relH1semi_u = relative(h1_seminorm(difference(fine_u, u0)), gu);
  rep.relH1semi_u_corrected = relative(h1_seminorm(difference(fine_u, u1)), gu);
  rep.relL2_v = relative(l2_norm(difference(fine_v, v0)), l2_norm(fine_v));
  rep.relH1semi_v = relative(h1_seminorm(difference(fine_v, v0)), h1_seminorm(fine_v));
  return rep;
}

SweepResult homogenization_sweep(const SweepSetup& setup, const LoadProgram& load) {
  if (setup.epsilons.empty()) throw Error(ErrorCode::InvalidArgument, "empty epsilon list");
  auto cell = std::make_shared<const Mesh>(build_unit_cell_mesh(setup.cell));
  const CorrectorBasis basis = solve_cell_problems(cell);

  SweepResult out;
  out.tensor = homogenized_tensor(basis);
  ModelParams hp = setup.params;
  hp.tensor = out.tensor.m0;
  auto macro = std::make_shared<const Mesh>(build_macro_mesh(setup.domain));
  out.homog = QuasiStaticSolver(macro, hp).evolve(load, Field::constant(macro, 1.0));

  const std::size_t n = setup.epsilons.size();
  out.fine.resize(n);
  out.errors.resize(n);
  parallel_for(n, [&](std::size_t k) {
    const double eps = setup.epsilons[k];
    auto mesh = perforated_domain(setup.domain, eps, setup.cell);
    out.fine[k] = fine_evolve(load, setup.params, mesh);
    const FractureState& f = out.fine[k].final_state;
    const FractureState& h = out.homog.final_state;
    out.errors[k] = compare_to_homog(f.u, f.v, h.u, h.v, basis, eps);
  });
  return out;
}

}  // namespace perfrac
