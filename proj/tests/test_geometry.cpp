#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "perfrac/error.hpp"
#include "perfrac/geometry.hpp"

using namespace perfrac;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

void check_mesh_invariants(const Mesh& m) {
  for (Index t = 0; t < m.num_triangles(); ++t) CHECK(m.signed_area(t) > 0.0);
  // every boundary edge belongs to exactly one triangle
  std::multiset<std::pair<Index, Index>> edges;
  for (const auto& t : m.triangles())
    for (int k = 0; k < 3; ++k) edges.insert(std::minmax(t[k], t[(k + 1) % 3]));
  for (const auto& e : m.boundary_edges()) CHECK(edges.count(std::minmax(e.nodes[0], e.nodes[1])) == 1);
}

std::set<std::array<Index, 3>> canonical_triangles(const Mesh& m) {
  std::set<std::array<Index, 3>> out;
  for (auto t : m.triangles()) {
    std::rotate(t.begin(), std::min_element(t.begin(), t.end()), t.end());
    out.insert(t);
  }
  return out;
}

}  // namespace

TEST_CASE("unit cell without a hole is the structured grid") {
  const Mesh m = build_unit_cell_mesh({0.0, 8});
  CHECK(m.region() == Region::Cell);
  CHECK(m.num_nodes() == 81);
  CHECK(m.num_triangles() == 128);
  CHECK_FALSE(m.has_tag(BoundaryTag::Hole));
  CHECK(m.has_tag(BoundaryTag::Outer));
  // n+1 left/right identifications plus n+1 bottom/top, corners included in both
  CHECK(m.periodic_pairs().size() == 18);
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-14));
  check_mesh_invariants(m);
}

TEST_CASE("unit cell with a hole") {
  const double r = 0.25;
  const Mesh m = build_unit_cell_mesh({r, 16});
  const double exact = 1.0 - std::numbers::pi * r * r;
  CHECK(std::abs(m.total_area() - exact) <= 0.02 * exact);
  CHECK(m.has_tag(BoundaryTag::Hole));
  check_mesh_invariants(m);

  SUBCASE("periodic pairs match under a unit shift") {
    for (const auto& p : m.periodic_pairs()) {
      const Vec2 d = m.node(p.slave) - m.node(p.master);
      const bool horizontal = std::abs(d.x - 1.0) <= 1e-10 && std::abs(d.y) <= 1e-10;
      const bool vertical = std::abs(d.y - 1.0) <= 1e-10 && std::abs(d.x) <= 1e-10;
      CHECK((horizontal || vertical));
      CHECK(p.master != p.slave);
    }
    // every frame node takes part
    std::set<Index> covered;
    for (const auto& p : m.periodic_pairs()) covered.insert({p.master, p.slave});
    const auto outer = m.nodes_with_tag(BoundaryTag::Outer);
    CHECK(covered.size() == static_cast<std::size_t>(std::count(outer.begin(), outer.end(), true)));
  }

  SUBCASE("no node inside the disk, hole edges hug the circle") {
    const Vec2 c{0.5, 0.5};
    for (Vec2 p : m.nodes()) CHECK(norm(p - c) >= r - 1e-12);
    const double h = m.max_edge_length();
    for (const auto& e : m.boundary_edges()) {
      if (e.tag != BoundaryTag::Hole) continue;
      const Vec2 mid = 0.5 * (m.node(e.nodes[0]) + m.node(e.nodes[1]));
      CHECK(std::abs(norm(mid - c) - r) <= h);
      CHECK(std::abs(norm(m.node(e.nodes[0]) - c) - r) <= 1e-12);
    }
  }
}

TEST_CASE("cell area converges under refinement") {
  const double r = 0.25, exact = 1.0 - std::numbers::pi * r * r;
  double prev = 1.0;
  for (int n : {16, 32, 64, 128}) {
    const double err = std::abs(build_unit_cell_mesh({r, n}).total_area() - exact);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("cell mesh is valid across the radius range") {
  for (double r : {0.01, 0.05, 0.15, 0.25, 0.35, 0.45})
    for (int n : {16, 32, 64}) {
      CAPTURE(r);
      CAPTURE(n);
      check_mesh_invariants(build_unit_cell_mesh({r, n}));
    }
}

TEST_CASE("cell mesh rejects bad radii") {
  CHECK(code_of([] { build_unit_cell_mesh({0.6, 8}); }) == ErrorCode::InvalidRadius);
  CHECK(code_of([] { build_unit_cell_mesh({0.5, 8}); }) == ErrorCode::InvalidRadius);
  CHECK(code_of([] { build_unit_cell_mesh({-0.1, 8}); }) == ErrorCode::InvalidRadius);
  CHECK(code_of([] { build_unit_cell_mesh({0.45, 4}); }) == ErrorCode::MeshDegenerate);
}

TEST_CASE("macro mesh") {
  const Mesh m2 = build_macro_mesh({0, 1, 0, 1, 2});
  CHECK(m2.num_nodes() == 9);
  CHECK(m2.num_triangles() == 8);
  CHECK(m2.region() == Region::Macro);
  CHECK(m2.periodic_pairs().empty());
  for (const auto& e : m2.boundary_edges()) CHECK(e.tag == BoundaryTag::Outer);
  CHECK(m2.boundary_edges().size() == 8);

  CHECK(std::abs(build_macro_mesh({0, 1, 0, 1, 64}).total_area() - 1.0) <= 1e-12);
  CHECK(std::abs(build_macro_mesh({0, 2, 0, 1, 4}).total_area() - 2.0) <= 1e-12);
  CHECK(code_of([] { build_macro_mesh({0, 0, 0, 1, 4}); }) == ErrorCode::MeshDegenerate);
}

TEST_CASE("perforated mesh") {
  SUBCASE("four holes at epsilon = 1/2") {
    const double eps = 0.5, r = 0.25;
    const Mesh m = build_perforated_mesh({0, 1, 0, 1, 0}, eps, {r, 16});
    CHECK(m.region() == Region::Perforated);
    const double exact = 1.0 - 4.0 * std::numbers::pi * (eps * r) * (eps * r);
    CHECK(std::abs(m.total_area() - exact) <= 0.02 * exact);
    check_mesh_invariants(m);
    std::set<std::pair<int, int>> cells;
    for (const auto& e : m.boundary_edges())
      if (e.tag == BoundaryTag::Hole) {
        const Vec2 p = m.node(e.nodes[0]);
        cells.insert({static_cast<int>(p.x / eps), static_cast<int>(p.y / eps)});
        const Vec2 center{eps * (std::floor(p.x / eps) + 0.5), eps * (std::floor(p.y / eps) + 0.5)};
        CHECK(std::abs(norm(p - center) - eps * r) <= 1e-12);
      }
    CHECK(cells.size() == 4);
    CHECK(m.periodic_pairs().empty());
  }

  SUBCASE("no holes reproduces the macro mesh") {
    const Mesh fine = build_perforated_mesh({0, 1, 0, 1, 0}, 1.0 / 3.0, {0.0, 6});
    const Mesh macro = build_macro_mesh({0, 1, 0, 1, 18});
    REQUIRE(fine.num_nodes() == macro.num_nodes());
    for (Index i = 0; i < fine.num_nodes(); ++i) CHECK(fine.node(i) == macro.node(i));
    CHECK(canonical_triangles(fine) == canonical_triangles(macro));
    CHECK_FALSE(fine.has_tag(BoundaryTag::Hole));
  }

  SUBCASE("rectangular domain") {
    const Mesh m = build_perforated_mesh({0, 2, 0, 1, 0}, 0.5, {0.2, 8});
    CHECK(m.total_area() == doctest::Approx(2.0 - 8.0 * std::numbers::pi * 0.01).epsilon(0.02));
  }

  CHECK(code_of([] { build_perforated_mesh({0, 1, 0, 1, 0}, 0.3, {0.25, 8}); }) == ErrorCode::TilingMismatch);
}

TEST_CASE("point location") {
  const Mesh m = build_unit_cell_mesh({0.25, 16});
  const PointLocator loc(m);
  for (Vec2 p : {Vec2{0.1, 0.1}, Vec2{0.0, 0.0}, Vec2{1.0, 1.0}, Vec2{0.9, 0.5}}) {
    const auto hit = loc.locate(p);
    REQUIRE(hit);
    const auto& t = m.triangle(hit->triangle);
    Vec2 q{};
    for (int k = 0; k < 3; ++k) q = q + hit->bary[k] * m.node(t[k]);
    CHECK(norm(q - p) <= 1e-12);
  }
  CHECK_FALSE(loc.locate({0.5, 0.5}));
  const auto snapped = loc.locate({0.5 + 0.249, 0.5}, 0.05);
  REQUIRE(snapped);
  CHECK(snapped->distance > 0.0);
  CHECK(snapped->distance < 0.05);
}

TEST_CASE("vtk legacy output") {
  const Mesh m = build_macro_mesh({0, 1, 0, 1, 2});
  std::vector<double> f(9, 1.5);
  std::ostringstream os;
  write_vtk(os, m, {{"u", &f}});
  const std::string s = os.str();
  CHECK(s.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  CHECK(s.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(s.find("POINTS 9 double") != std::string::npos);
  CHECK(s.find("CELLS 8 32") != std::string::npos);
  CHECK(s.find("SCALARS u double 1") != std::string::npos);
  std::vector<double> wrong(3, 0.0);
  std::ostringstream bad;
  CHECK_THROWS_AS(write_vtk(bad, m, {{"w", &wrong}}), Error);
}
