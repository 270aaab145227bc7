#include "perfrac/cell_homog.hpp"

#include <cmath>
#include <sstream>

#include "perfrac/error.hpp"
#include "perfrac/parallel.hpp"

namespace perfrac {

CorrectorBasis solve_cell_problems(std::shared_ptr<const Mesh> cell_mesh, double tol) {
  if (!cell_mesh || cell_mesh->region() != Region::Cell || cell_mesh->periodic_pairs().empty())
    throw Error(ErrorCode::MeshMismatch, "cell problems need a CELL mesh with periodic pairs");
  const Mesh& mesh = *cell_mesh;
  const SparseOperator k = assemble_stiffness(mesh, CoefficientSpec::constant(1.0));

  CorrectorBasis basis;
  basis.mesh = cell_mesh;
  basis.volume = mesh.total_area();
  // Weak form: int grad z_i . grad phi = int e_i . grad phi for periodic phi,
  // i.e. the folded stiffness applied to the coordinate interpolant y_i.
  parallel_for(2, [&](std::size_t i) {
    Vector coord(static_cast<std::size_t>(mesh.num_nodes()));
    for (Index v = 0; v < mesh.num_nodes(); ++v) coord[v] = (i == 0) ? mesh.node(v).x : mesh.node(v).y;
    const PeriodicSystem sys = apply_periodic(k, k.apply(coord), mesh.periodic_pairs());
    Vector z = sys.expand(solve_pinned(sys, tol));
    remove_mean(mesh, z);
    basis.z[i] = Field{cell_mesh, std::move(z)};
  });

  const auto g1 = element_gradients(mesh, basis.z[0].values);
  const auto g2 = element_gradients(mesh, basis.z[1].values);
  basis.gradients.resize(g1.size());
  for (std::size_t t = 0; t < g1.size(); ++t) basis.gradients[t] = {g1[t], g2[t]};
  return basis;
}

HomogTensor homogenized_tensor(const CorrectorBasis& basis, double identity_tol) {
  const Mesh& mesh = *basis.mesh;
  // flux[i][j] = int d_i z_j, energy[i][j] = int grad z_i . grad z_j
  double flux[2][2] = {{0, 0}, {0, 0}}, energy[2][2] = {{0, 0}, {0, 0}};
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const double a = mesh.signed_area(t);
    const auto& g = basis.gradients[static_cast<std::size_t>(t)];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        flux[i][j] += a * (i == 0 ? g[j].x : g[j].y);
        energy[i][j] += a * dot(g[i], g[j]);
      }
  }
  const double inv = 1.0 / basis.volume;
  HomogTensor h;
  h.cell_volume = basis.volume;
  h.flux_form = {1.0 - inv * flux[0][0], -inv * flux[0][1], -inv * flux[1][0], 1.0 - inv * flux[1][1]};
  h.energy_form = {1.0 - inv * energy[0][0], -inv * energy[0][1], -inv * energy[1][0], 1.0 - inv * energy[1][1]};
  h.identity_residual = h.flux_form.max_abs_diff(h.energy_form);
  h.skew = 0.5 * std::abs(h.flux_form.a12 - h.flux_form.a21);
  h.m0 = h.flux_form.symmetrized();
  if (h.identity_residual > identity_tol) {
    std::ostringstream msg;
    msg << "matrix identity residual " << h.identity_residual << " exceeds " << identity_tol;
    throw Error(ErrorCode::IdentityViolation, msg.str());
  }
  return h;
}

Field reconstruct_corrector(const Field& u0, const CorrectorBasis& basis, double epsilon,
                            std::shared_ptr<const Mesh> perforated) {
  if (!u0.mesh || !perforated) throw Error(ErrorCode::MeshMismatch, "missing mesh");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  const Mesh& macro = *u0.mesh;
  const Mesh& cell = *basis.mesh;
  const PointLocator macro_loc(macro);
  const PointLocator cell_loc(cell);
  const auto grads = element_gradients(macro, u0.values);
  const Vec2 origin = macro.min_corner();
  const double macro_snap = 1e-9 * std::max(1.0, norm(macro.max_corner() - origin));
  const double cell_snap = cell.max_edge_length();

  Field out{perforated, Vector(static_cast<std::size_t>(perforated->num_nodes()))};
  for (Index v = 0; v < perforated->num_nodes(); ++v) {
    const Vec2 x = perforated->node(v);
    const auto hit = macro_loc.locate(x, macro_snap);
    if (!hit) {
      std::ostringstream msg;
      msg << "perforated node (" << x.x << ", " << x.y << ") is outside the macro domain";
      throw Error(ErrorCode::PointOutsideDomain, msg.str());
    }
    const auto& tri = macro.triangle(hit->triangle);
    const double u = hit->bary[0] * u0[tri[0]] + hit->bary[1] * u0[tri[1]] + hit->bary[2] * u0[tri[2]];
    const Vec2 du = grads[static_cast<std::size_t>(hit->triangle)];

    const Vec2 s = (1.0 / epsilon) * (x - origin);
    const Vec2 y{s.x - std::floor(s.x), s.y - std::floor(s.y)};
    const auto chit = cell_loc.locate(y, cell_snap);
    if (!chit) {
      std::ostringstream msg;
      msg << "cell coordinate (" << y.x << ", " << y.y << ") lies inside the hole";
      throw Error(ErrorCode::PointOutsideDomain, msg.str());
    }
    const auto& ct = cell.triangle(chit->triangle);
    double z[2];
    for (int i = 0; i < 2; ++i)
      z[i] = chit->bary[0] * basis.z[i][ct[0]] + chit->bary[1] * basis.z[i][ct[1]] +
             chit->bary[2] * basis.z[i][ct[2]];
    out.values[static_cast<std::size_t>(v)] = u - epsilon * (z[0] * du.x + z[1] * du.y);
  }
  return out;
}

}  // namespace perfrac
