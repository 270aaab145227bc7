#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

#include "doctest.h"
#include "perfrac/error.hpp"
#include "perfrac/fem.hpp"

using namespace perfrac;

namespace {

std::shared_ptr<const Mesh> unit_square(int n) {
  return std::make_shared<const Mesh>(build_macro_mesh({0, 1, 0, 1, n}));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

// Degree-4 symmetric rule (6 points) on the reference triangle.
struct QuadPoint {
  double l0, l1, l2, w;
};
constexpr QuadPoint kRule[6] = {
    {0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011},
    {0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011},
    {0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011},
    {0.091576213509771, 0.091576213509771, 0.816847572980459, 0.109951743655322},
    {0.091576213509771, 0.816847572980459, 0.091576213509771, 0.109951743655322},
    {0.816847572980459, 0.091576213509771, 0.091576213509771, 0.109951743655322},
};

// L2 distance between a P1 field and a smooth function, by quadrature.
double l2_error(const Field& uh, const auto& exact) {
  const Mesh& m = *uh.mesh;
  double s = 0.0;
  for (Index t = 0; t < m.num_triangles(); ++t) {
    const auto& tri = m.triangle(t);
    for (const auto& q : kRule) {
      const Vec2 p = q.l0 * m.node(tri[0]) + q.l1 * m.node(tri[1]) + q.l2 * m.node(tri[2]);
      const double d = q.l0 * uh[tri[0]] + q.l1 * uh[tri[1]] + q.l2 * uh[tri[2]] - exact(p);
      s += q.w * m.signed_area(t) * d * d;
    }
  }
  return std::sqrt(s);
}

Field solve_dirichlet_laplace(std::shared_ptr<const Mesh> mesh, const auto& boundary, const auto& source) {
  const SparseOperator k = assemble_stiffness(*mesh, CoefficientSpec::constant(1.0));
  const Vector mass = lumped_mass(*mesh);
  Vector rhs(mass.size());
  for (Index i = 0; i < mesh->num_nodes(); ++i) rhs[i] = mass[i] * source(mesh->node(i));
  const Field g = Field::interpolate(mesh, boundary);
  const auto sys = apply_dirichlet(k, rhs, g.values, mesh->nodes_with_tag(BoundaryTag::Outer));
  return {mesh, solve_spd(sys.op, sys.rhs, {1e-12, 0}).x};
}

}  // namespace

TEST_CASE("stiffness assembly") {
  const auto mesh = unit_square(2);
  const SparseOperator k1 = assemble_stiffness(*mesh, CoefficientSpec::constant(1.0));
  CHECK(k1.is_symmetric());
  const Field x1 = Field::interpolate(mesh, [](Vec2 p) { return p.x; });
  const Field x2 = Field::interpolate(mesh, [](Vec2 p) { return p.y; });
  CHECK(std::abs(quadratic_form(k1, x1.values, x1.values) - 1.0) <= 1e-12);

  SUBCASE("constant scaling") {
    const SparseOperator k3 = assemble_stiffness(*mesh, CoefficientSpec::constant(3.0));
    for (std::size_t i = 0; i < k1.values().size(); ++i) CHECK(k3.values()[i] == doctest::Approx(3.0 * k1.values()[i]));
  }
  SUBCASE("matrix coefficient") {
    const SparseOperator kd = assemble_stiffness(*mesh, CoefficientSpec::matrix(Mat2::diagonal(2.0, 1.0)));
    CHECK(std::abs(quadratic_form(kd, x2.values, x2.values) - 1.0) <= 1e-12);
    CHECK(std::abs(quadratic_form(kd, x1.values, x1.values) - 2.0) <= 1e-12);
  }
  SUBCASE("linearity in the coefficient") {
    const auto fine = unit_square(8);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(0.1, 2.0);
    Vector c1(static_cast<std::size_t>(fine->num_nodes())), c2(c1.size()), mix(c1.size());
    const double alpha = 0.7, beta = 2.5;
    for (std::size_t i = 0; i < c1.size(); ++i) {
      c1[i] = dist(rng);
      c2[i] = dist(rng);
      mix[i] = alpha * c1[i] + beta * c2[i];
    }
    const Mat2 m{2.0, 0.3, 0.3, 1.0};
    const auto k_a = assemble_stiffness(*fine, CoefficientSpec::weighted(c1, m));
    const auto k_b = assemble_stiffness(*fine, CoefficientSpec::weighted(c2, m));
    const auto k_mix = assemble_stiffness(*fine, CoefficientSpec::weighted(mix, m));
    for (std::size_t i = 0; i < k_mix.values().size(); ++i)
      CHECK(std::abs(k_mix.values()[i] - alpha * k_a.values()[i] - beta * k_b.values()[i]) <=
            1e-12 * k_mix.max_abs());
    // quadratic forms of SPD specs are nonnegative
    for (int trial = 0; trial < 20; ++trial) {
      Vector a(c1.size());
      for (double& x : a) x = dist(rng) - 1.0;
      CHECK(quadratic_form(k_mix, a, a) >= 0.0);
    }
  }
  CHECK(code_of([&] { assemble_stiffness(*mesh, CoefficientSpec::weighted(Vector(3, 1.0))); }) ==
        ErrorCode::MeshMismatch);
}

TEST_CASE("Dirichlet elimination") {
  const auto mesh = unit_square(8);
  const auto outer = mesh->nodes_with_tag(BoundaryTag::Outer);
  const SparseOperator k = assemble_stiffness(*mesh, CoefficientSpec::constant(1.0));
  const Vector zero(static_cast<std::size_t>(mesh->num_nodes()), 0.0);

  const auto check_solution = [&](const std::function<double(Vec2)>& g) {
    const Field gf = Field::interpolate(mesh, g);
    const auto sys = apply_dirichlet(k, zero, gf.values, outer);
    CHECK(sys.op.is_symmetric());
    const Vector u = solve_spd(sys.op, sys.rhs).x;
    for (Index i = 0; i < mesh->num_nodes(); ++i) CHECK(std::abs(u[i] - g(mesh->node(i))) <= 1e-10);
  };
  check_solution([](Vec2) { return 0.0; });
  check_solution([](Vec2 p) { return p.x; });
  check_solution([](Vec2) { return 1.0; });
}

TEST_CASE("periodic folding") {
  const Mesh cell = build_unit_cell_mesh({0.25, 16});
  const SparseOperator k = assemble_stiffness(cell, CoefficientSpec::constant(1.0));
  const Vector zero(static_cast<std::size_t>(cell.num_nodes()), 0.0);
  const PeriodicSystem sys = apply_periodic(k, zero, cell.periodic_pairs());
  CHECK(sys.op.is_symmetric());
  CHECK(sys.num_dofs == cell.num_nodes() - (2 * 17 - 1));

  const Vector ones(static_cast<std::size_t>(sys.num_dofs), 1.0);
  for (double x : sys.expand(ones)) CHECK(x == 1.0);
  for (double r : sys.op.apply(ones)) CHECK(std::abs(r) <= 1e-12);

  const Vector z = solve_pinned(sys, 1e-12);
  for (double x : z) CHECK(x == 0.0);

  // paired nodes carry equal values after expansion
  Vector dofs(static_cast<std::size_t>(sys.num_dofs));
  for (std::size_t i = 0; i < dofs.size(); ++i) dofs[i] = std::sin(static_cast<double>(i));
  const Vector nodal = sys.expand(dofs);
  for (const auto& p : cell.periodic_pairs()) CHECK(nodal[p.master] == nodal[p.slave]);
}

TEST_CASE("conjugate gradients") {
  SUBCASE("identity") {
    const SparseOperator id(3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
    const Vector b{1.0, -2.0, 3.0};
    const Vector x = solve_spd(id, b).x;
    for (int i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(b[i]));
  }
  SUBCASE("diagonal") {
    const SparseOperator d(2, {{0, 0, 2.0}, {1, 1, 4.0}});
    const Vector x = solve_spd(d, Vector{2.0, 4.0}).x;
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(1.0));
  }
  SUBCASE("iteration cap") {
    const auto mesh = unit_square(16);
    const SparseOperator k = assemble_stiffness(*mesh, CoefficientSpec::constant(1.0));
    const Field g = Field::interpolate(mesh, [](Vec2 p) { return p.x * p.y; });
    const auto sys = apply_dirichlet(k, Vector(g.values.size(), 1.0), g.values,
                                     mesh->nodes_with_tag(BoundaryTag::Outer));
    CHECK(code_of([&] { solve_spd(sys.op, sys.rhs, {1e-14, 2}); }) == ErrorCode::NoConvergence);
  }
  SUBCASE("indefinite") {
    const SparseOperator bad(2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}});
    CHECK(code_of([&] { solve_spd(bad, Vector{1.0, -1.0}); }) == ErrorCode::SingularSystem);
  }
}

TEST_CASE("manufactured Dirichlet problem converges at second order") {
  const double pi = std::numbers::pi;
  const auto exact = [pi](Vec2 p) { return std::sin(pi * p.x) * std::sin(pi * p.y); };
  const auto source = [&](Vec2 p) { return 2.0 * pi * pi * exact(p); };
  const auto zero = [](Vec2) { return 0.0; };

  double prev_l2 = 0.0, prev_energy = std::numeric_limits<double>::infinity();
  for (int n : {8, 16, 32, 64}) {
    const Field uh = solve_dirichlet_laplace(unit_square(n), zero, source);
    const double err = l2_error(uh, exact);
    // energy-norm error via |u|^2 - |u_h|^2 = |u - u_h|^2 (Galerkin orthogonality)
    const double energy = std::sqrt(std::abs(pi * pi / 2.0 - std::pow(h1_seminorm(uh), 2)));
    CHECK(energy < prev_energy);
    prev_energy = energy;
    if (n == 32) {
      const double ratio = prev_l2 / err;
      CAPTURE(ratio);
      CHECK(ratio >= 3.5);
      CHECK(ratio <= 4.5);
    }
    prev_l2 = err;
  }
}

TEST_CASE("box-constrained minimization") {
  SUBCASE("projection toy") {
    const SparseOperator id(2, {{0, 0, 1.0}, {1, 1, 1.0}});
    const auto res = solve_box_constrained(id, Vector{2.0, -2.0}, Vector{0.0, 0.0}, Vector{1.0, 1.0});
    CHECK(res.x[0] == 1.0);
    CHECK(res.x[1] == 0.0);
    CHECK(res.kkt.num_upper == 1);
    CHECK(res.kkt.num_lower == 1);
    CHECK(res.kkt.worst() == 0.0);
  }

  const auto mesh = unit_square(12);
  const auto n = static_cast<std::size_t>(mesh->num_nodes());
  // screened Laplacian: SPD without boundary conditions
  SparseOperator k = assemble_stiffness(*mesh, CoefficientSpec::constant(0.2));
  const Vector mass = lumped_mass(*mesh);
  {
    auto& vals = k.mutable_values();
    for (Index i = 0; i < mesh->num_nodes(); ++i)
      for (Index p = k.row_start()[i]; p < k.row_start()[i + 1]; ++p)
        if (k.columns()[p] == i) vals[p] += 5.0 * mass[i];
  }
  Vector b(n);
  for (Index i = 0; i < mesh->num_nodes(); ++i) b[i] = mass[i] * (0.5 + 0.3 * std::cos(3.0 * mesh->node(i).x));

  SUBCASE("interior minimizer equals the unconstrained solve") {
    const Vector free = solve_spd(k, b, {1e-13, 0}).x;
    const auto res = solve_box_constrained(k, b, Vector(n, -10.0), Vector(n, 10.0), {1e-12, 0, 1.0, {}});
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(res.x[i] - free[i]) <= 1e-9);
    const auto huge = solve_box_constrained(k, b, Vector(n, -1e30), Vector(n, 1e30), {1e-12, 0, 1.6, {}});
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(huge.x[i] - free[i]) <= 1e-9);
  }
  SUBCASE("pinned box returns the bound") {
    Vector fixed(n);
    for (std::size_t i = 0; i < n; ++i) fixed[i] = 0.01 * static_cast<double>(i % 7);
    const auto res = solve_box_constrained(k, b, fixed, fixed);
    CHECK(res.x == fixed);
  }
  SUBCASE("active upper bound satisfies KKT with the right sign") {
    const Vector upper(n, 0.09);
    BoxOptions opts;
    opts.tol = 1e-8;
    opts.relaxation = 1.5;
    opts.residual_scale = mass;
    const auto res = solve_box_constrained(k, b, Vector(n, 0.0), upper, opts);
    CHECK(res.kkt.num_upper > 0);
    const auto rep = kkt_report(k, b, res.x, Vector(n, 0.0), upper, std::span<const double>(mass));
    CHECK(rep.worst() <= 1e-8);
    for (double x : res.x) {
      CHECK(x >= 0.0);
      CHECK(x <= 0.09);
    }
  }
  SUBCASE("errors") {
    Vector lo(n, 0.0), hi(n, 1.0);
    lo[3] = 2.0;
    CHECK(code_of([&] { solve_box_constrained(k, b, lo, hi); }) == ErrorCode::InfeasibleBounds);
    CHECK(code_of([&] { solve_box_constrained(k, b, Vector(n, -1.0), hi, {1e-15, 1, 1.0, {}}); }) ==
          ErrorCode::NoConvergence);
  }
}

TEST_CASE("energy quadrature") {
  const auto mesh = unit_square(6);
  const Field ones = Field::constant(mesh, 1.0);
  const Field zeros = Field::constant(mesh, 0.0);
  const Field x1 = Field::interpolate(mesh, [](Vec2 p) { return p.x; });

  CHECK(damage_energy(ones, 0.1) == 0.0);
  CHECK(elastic_energy(x1, ones, 0.01, Mat2::identity()) == doctest::Approx((1.0 + 0.01) / 2.0).epsilon(1e-13));
  CHECK(damage_energy(zeros, 1.0) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(surface_energy(zeros, 1.0, Mat2::identity()) == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(l2_norm(ones) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(l2_norm(x1) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-13));
  CHECK(h1_seminorm(x1, Mat2::diagonal(4.0, 1.0)) == doctest::Approx(2.0).epsilon(1e-13));

  const auto other = unit_square(6);
  const Field foreign = Field::constant(other, 1.0);
  CHECK(code_of([&] { elastic_energy(x1, foreign, 0.01, Mat2::identity()); }) == ErrorCode::MeshMismatch);
}
