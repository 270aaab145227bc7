#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "perfrac/types.hpp"

namespace perfrac {

enum class Region { Cell, Macro, Perforated };
enum class BoundaryTag { Outer, Hole };

struct BoundaryEdge {
  std::array<Index, 2> nodes;
  BoundaryTag tag;
};

/// Geometric identification of a frame node with its image under a unit shift.
struct PeriodicPair {
  Index master;  // on the left (x = 0) or bottom (y = 0) frame edge
  Index slave;   // on the right (x = 1) or top (y = 1) frame edge
};

/// Planar P1 triangulation. Immutable once built; triangles are counterclockwise.
class Mesh {
 public:
  Mesh(Region region, std::vector<Vec2> nodes, std::vector<std::array<Index, 3>> triangles,
       std::vector<PeriodicPair> periodic_pairs = {});

  Region region() const { return region_; }
  Index num_nodes() const { return static_cast<Index>(nodes_.size()); }
  Index num_triangles() const { return static_cast<Index>(triangles_.size()); }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  const std::vector<PeriodicPair>& periodic_pairs() const { return periodic_pairs_; }

  Vec2 node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::array<Index, 3>& triangle(Index t) const { return triangles_[static_cast<std::size_t>(t)]; }

  double signed_area(Index t) const;
  double total_area() const;
  double max_edge_length() const;
  Vec2 min_corner() const { return lo_; }
  Vec2 max_corner() const { return hi_; }

  /// Nodal mask: true for nodes touched by a boundary edge carrying `tag`.
  std::vector<bool> nodes_with_tag(BoundaryTag tag) const;
  bool has_tag(BoundaryTag tag) const;

 private:
  void classify_boundary();

  Region region_;
  std::vector<Vec2> nodes_;
  std::vector<std::array<Index, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<PeriodicPair> periodic_pairs_;
  Vec2 lo_, hi_;
};

/// Unit cell (0,1)^2 minus a closed disk of radius r centered at (1/2,1/2).
struct CellGeometry {
  double radius = 0.25;
  int resolution = 32;  // segments per unit edge

  Vec2 center() const { return {0.5, 0.5}; }
  double volume() const;  // analytic |Y| = 1 - pi r^2
  friend bool operator==(const CellGeometry&, const CellGeometry&) = default;
};

struct MacroDomain {
  double ax = 0.0, bx = 1.0;
  double ay = 0.0, by = 1.0;
  int resolution = 32;  // segments along the shorter side

  double width() const { return bx - ax; }
  double height() const { return by - ay; }
  friend bool operator==(const MacroDomain&, const MacroDomain&) = default;
};

Mesh build_unit_cell_mesh(const CellGeometry& geom);
Mesh build_macro_mesh(const MacroDomain& dom);

/// Tiling of `dom` by copies of the cell scaled by `epsilon`. The cell
/// resolution is taken from `geom`; `dom.resolution` is ignored.
Mesh build_perforated_mesh(const MacroDomain& dom, double epsilon, const CellGeometry& geom);

/// Number of cells per direction when epsilon tiles the domain exactly.
std::array<int, 2> tile_counts(const MacroDomain& dom, double epsilon);

/// Barycentric point location on a triangulation, accelerated by a bucket grid.
class PointLocator {
 public:
  struct Hit {
    Index triangle;
    std::array<double, 3> bary;  // clamped to [0,1] when the point was snapped
    double distance;             // 0 for points inside the mesh
  };

  explicit PointLocator(const Mesh& mesh);

  /// Containing triangle, or the nearest one within `snap` of the point.
  std::optional<Hit> locate(Vec2 p, double snap = 0.0) const;

 private:
  const Mesh* mesh_;
  Vec2 lo_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<Index>> buckets_;
};

/// VTK legacy ASCII (v3.0) UNSTRUCTURED_GRID with optional nodal scalars.
struct NamedField {
  const char* name;
  const std::vector<double>* values;
};
void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<NamedField>& point_data = {},
               const char* title = "perfrac");

}  // namespace perfrac
