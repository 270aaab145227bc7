#include "perfrac/mms.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include "perfrac/fem.hpp"

namespace perfrac {

namespace {

// Degree-4 symmetric rule on the reference triangle (weights sum to 1).
struct QuadPoint {
  double l[3];
  double w;
};
constexpr double kA = 0.445948490915965, kB = 0.108103018168070, kWa = 0.223381589678011;
constexpr double kC = 0.091576213509771, kD = 0.816847572980459, kWc = 0.109951743655322;
constexpr QuadPoint kRule[6] = {{{kA, kA, kB}, kWa}, {{kA, kB, kA}, kWa}, {{kB, kA, kA}, kWa},
                                {{kC, kC, kD}, kWc}, {{kC, kD, kC}, kWc}, {{kD, kC, kC}, kWc}};

constexpr double kPi = std::numbers::pi;
double exact(Vec2 p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); }
Vec2 exact_grad(Vec2 p) {
  return {kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y), kPi * std::sin(kPi * p.x) * std::cos(kPi * p.y)};
}
double source(Vec2 p) { return 2.0 * kPi * kPi * exact(p); }

Vec2 at(const Mesh& m, const std::array<Index, 3>& tri, const QuadPoint& q) {
  return q.l[0] * m.node(tri[0]) + q.l[1] * m.node(tri[1]) + q.l[2] * m.node(tri[2]);
}

}  // namespace

std::vector<MmsLevel> mms_study(const std::vector<int>& levels, double solver_tol) {
  std::vector<MmsLevel> out;
  for (int n : levels) {
    auto mesh = std::make_shared<const Mesh>(build_macro_mesh({0.0, 1.0, 0.0, 1.0, n}));
    const Mesh& m = *mesh;
    const SparseOperator k = assemble_stiffness(m, CoefficientSpec::constant(1.0));
    Vector rhs(static_cast<std::size_t>(m.num_nodes()), 0.0);
    for (Index t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangle(t);
      const double area = m.signed_area(t);
      for (const auto& q : kRule) {
        const double f = area * q.w * source(at(m, tri, q));
        for (int a = 0; a < 3; ++a) rhs[static_cast<std::size_t>(tri[a])] += f * q.l[a];
      }
    }
    const Vector zero(rhs.size(), 0.0);
    const auto sys = apply_dirichlet(k, rhs, zero, m.nodes_with_tag(BoundaryTag::Outer));
    const Vector u = solve_spd(sys.op, sys.rhs, {solver_tol, 0}).x;

    const auto grads = element_gradients(m, u);
    double l2 = 0.0, h1 = 0.0;
    for (Index t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangle(t);
      const double area = m.signed_area(t);
      for (const auto& q : kRule) {
        const Vec2 p = at(m, tri, q);
        double uh = 0.0;
        for (int a = 0; a < 3; ++a) uh += q.l[a] * u[static_cast<std::size_t>(tri[a])];
        const double d = uh - exact(p);
        const Vec2 g = grads[static_cast<std::size_t>(t)] - exact_grad(p);
        l2 += area * q.w * d * d;
        h1 += area * q.w * dot(g, g);
      }
    }
    MmsLevel level{n, 1.0 / n, std::sqrt(l2), std::sqrt(h1), 0.0, 0.0};
    if (!out.empty()) {
      const MmsLevel& prev = out.back();
      const double ratio = std::log(prev.h / level.h);
      level.l2_rate = std::log(prev.l2_error / level.l2_error) / ratio;
      level.h1_rate = std::log(prev.h1_error / level.h1_error) / ratio;
    }
    out.push_back(level);
  }
  return out;
}

}  // namespace perfrac
