#include "perfrac/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "perfrac/error.hpp"

namespace perfrac {

namespace {

constexpr double kFrameTol = 1e-12;

std::uint64_t edge_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

// Structured (nx+1)x(ny+1) lattice over [0,1]^2 in index space with alternating
// diagonals; the pattern is invariant under both axis reflections when nx and
// ny are even.
void structured_triangles(int nx, int ny, std::vector<std::array<Index, 3>>& tris) {
  const auto id = [nx](int i, int j) { return static_cast<Index>(j * (nx + 1) + i); };
  tris.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Index a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
  }
}

// Counts edge incidences over the given triangles.
std::unordered_map<std::uint64_t, int> edge_counts(const std::vector<std::array<Index, 3>>& tris) {
  std::unordered_map<std::uint64_t, int> counts;
  counts.reserve(tris.size() * 2);
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k) ++counts[edge_key(t[k], t[(k + 1) % 3])];
  return counts;
}

double triangle_area(const std::vector<Vec2>& nodes, const std::array<Index, 3>& t) {
  const Vec2 a = nodes[static_cast<std::size_t>(t[0])];
  const Vec2 b = nodes[static_cast<std::size_t>(t[1])];
  const Vec2 c = nodes[static_cast<std::size_t>(t[2])];
  return 0.5 * cross(b - a, c - a);
}

bool on_unit_frame(Vec2 p) {
  return std::abs(p.x) < kFrameTol || std::abs(p.x - 1.0) < kFrameTol ||
         std::abs(p.y) < kFrameTol || std::abs(p.y - 1.0) < kFrameTol;
}

}  // namespace

Mesh::Mesh(Region region, std::vector<Vec2> nodes, std::vector<std::array<Index, 3>> triangles,
           std::vector<PeriodicPair> periodic_pairs)
    : region_(region),
      nodes_(std::move(nodes)),
      triangles_(std::move(triangles)),
      periodic_pairs_(std::move(periodic_pairs)) {
  if (nodes_.empty() || triangles_.empty())
    throw Error(ErrorCode::MeshDegenerate, "mesh has no nodes or no triangles");
  const Index n = num_nodes();
  for (const auto& t : triangles_)
    for (Index v : t)
      if (v < 0 || v >= n) throw Error(ErrorCode::MeshDegenerate, "triangle references missing node");
  for (Index t = 0; t < num_triangles(); ++t)
    if (!(signed_area(t) > 0.0)) {
      std::ostringstream msg;
      msg << "triangle " << t << " has non-positive area " << signed_area(t);
      throw Error(ErrorCode::MeshDegenerate, msg.str());
    }
  lo_ = hi_ = nodes_.front();
  for (Vec2 p : nodes_) {
    lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
    hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
  }
  classify_boundary();
}

void Mesh::classify_boundary() {
  const double tol = 1e-10 * std::max(hi_.x - lo_.x, hi_.y - lo_.y);
  const auto on_side = [&](Vec2 a, Vec2 b) {
    const auto same = [tol](double u, double w, double s) {
      return std::abs(u - s) <= tol && std::abs(w - s) <= tol;
    };
    return same(a.x, b.x, lo_.x) || same(a.x, b.x, hi_.x) || same(a.y, b.y, lo_.y) ||
           same(a.y, b.y, hi_.y);
  };
  const auto counts = edge_counts(triangles_);
  boundary_edges_.clear();
  // Walk triangles (not the hash map) so the edge order is deterministic.
  for (const auto& t : triangles_) {
    for (int k = 0; k < 3; ++k) {
      const Index a = t[k], b = t[(k + 1) % 3];
      if (counts.at(edge_key(a, b)) != 1) continue;
      const BoundaryTag tag = on_side(node(a), node(b)) ? BoundaryTag::Outer : BoundaryTag::Hole;
      boundary_edges_.push_back({{a, b}, tag});
    }
  }
}

double Mesh::signed_area(Index t) const { return triangle_area(nodes_, triangle(t)); }

double Mesh::total_area() const {
  double sum = 0.0;
  for (Index t = 0; t < num_triangles(); ++t) sum += signed_area(t);
  return sum;
}

double Mesh::max_edge_length() const {
  double h = 0.0;
  for (const auto& t : triangles_)
    for (int k = 0; k < 3; ++k) h = std::max(h, norm(node(t[(k + 1) % 3]) - node(t[k])));
  return h;
}

std::vector<bool> Mesh::nodes_with_tag(BoundaryTag tag) const {
  std::vector<bool> mask(nodes_.size(), false);
  for (const auto& e : boundary_edges_)
    if (e.tag == tag) mask[static_cast<std::size_t>(e.nodes[0])] = mask[static_cast<std::size_t>(e.nodes[1])] = true;
  return mask;
}

bool Mesh::has_tag(BoundaryTag tag) const {
  return std::any_of(boundary_edges_.begin(), boundary_edges_.end(),
                     [tag](const BoundaryEdge& e) { return e.tag == tag; });
}

double CellGeometry::volume() const { return 1.0 - std::numbers::pi * radius * radius; }

Mesh build_unit_cell_mesh(const CellGeometry& geom) {
  const double r = geom.radius;
  if (!(r >= 0.0 && r < 0.5)) {
    std::ostringstream msg;
    msg << "hole radius " << r << " outside [0, 1/2)";
    throw Error(ErrorCode::InvalidRadius, msg.str());
  }
  const int n = geom.resolution;
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "cell resolution must be at least 4");

  std::vector<Vec2> nodes;
  nodes.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
  std::vector<std::array<Index, 3>> tris;
  structured_triangles(n, n, tris);

  if (r > 0.0) {
    const Vec2 c = geom.center();
    std::erase_if(tris, [&](const std::array<Index, 3>& t) {
      const Vec2 g = (1.0 / 3.0) * (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]);
      return norm(g - c) < r;
    });
    // A hole smaller than the lattice spacing may leave the center node in use.
    std::erase_if(tris, [&](const std::array<Index, 3>& t) {
      return std::any_of(t.begin(), t.end(), [&](Index v) { return norm(nodes[v] - c) < 1e-14; });
    });

    // Snap hole-boundary nodes (and any surviving node inside B) radially onto
    // the circle. Triangles left with all three vertices on the circle lie
    // inside the closed disk and are dropped; repeat until stable.
    std::vector<bool> on_circle(nodes.size(), false);
    const auto project = [&](Index v) {
      if (on_circle[v]) return;
      const Vec2 p = nodes[v];
      if (on_unit_frame(p))
        throw Error(ErrorCode::MeshDegenerate, "hole boundary reaches the cell frame; refine the mesh");
      const Vec2 d = p - c;
      const double len = norm(d);
      if (len == 0.0) throw Error(ErrorCode::MeshDegenerate, "node at the hole center");
      nodes[v] = c + (r / len) * d;
      on_circle[v] = true;
    };
    for (;;) {
      const auto counts = edge_counts(tris);
      for (const auto& t : tris)
        for (int k = 0; k < 3; ++k) {
          const Index a = t[k], b = t[(k + 1) % 3];
          if (counts.at(edge_key(a, b)) == 1 && !(on_unit_frame(nodes[a]) && on_unit_frame(nodes[b]) &&
                                                  (nodes[a].x == nodes[b].x || nodes[a].y == nodes[b].y))) {
            project(a);
            project(b);
          }
          if (norm(nodes[t[k]] - c) < r) project(t[k]);
        }
      const std::size_t before = tris.size();
      std::erase_if(tris, [&](const std::array<Index, 3>& t) {
        return on_circle[t[0]] && on_circle[t[1]] && on_circle[t[2]];
      });
      if (tris.size() == before) break;
    }

    // Compact node numbering, preserving lattice order.
    std::vector<Index> remap(nodes.size(), -1);
    for (const auto& t : tris)
      for (Index v : t) remap[v] = 0;
    std::vector<Vec2> kept;
    for (std::size_t v = 0; v < nodes.size(); ++v)
      if (remap[v] == 0) {
        remap[v] = static_cast<Index>(kept.size());
        kept.push_back(nodes[v]);
      }
    for (auto& t : tris)
      for (Index& v : t) v = remap[static_cast<std::size_t>(v)];
    nodes = std::move(kept);

    for (const auto& t : tris)
      if (!(triangle_area(nodes, t) > 0.0))
        throw Error(ErrorCode::MeshDegenerate, "hole carving produced a non-positive triangle");
  }

  // Frame nodes are untouched by carving, so they keep their lattice coordinates.
  std::map<std::pair<long, long>, Index> frame;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    const Vec2 p = nodes[v];
    if (on_unit_frame(p)) frame[{std::lround(p.x * n), std::lround(p.y * n)}] = static_cast<Index>(v);
  }
  std::vector<PeriodicPair> pairs;
  for (int j = 0; j <= n; ++j) pairs.push_back({frame.at({0, j}), frame.at({n, j})});
  for (int i = 0; i <= n; ++i) pairs.push_back({frame.at({i, 0}), frame.at({i, n})});

  return Mesh(Region::Cell, std::move(nodes), std::move(tris), std::move(pairs));
}

Mesh build_macro_mesh(const MacroDomain& dom) {
  const double w = dom.width(), h = dom.height();
  if (!(w > 0.0 && h > 0.0)) throw Error(ErrorCode::MeshDegenerate, "macro domain has non-positive extent");
  if (dom.resolution < 1) throw Error(ErrorCode::InvalidArgument, "macro resolution must be positive");
  const double spacing = std::min(w, h) / dom.resolution;
  const int nx = std::max(1, static_cast<int>(std::lround(w / spacing)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / spacing)));

  std::vector<Vec2> nodes;
  nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      nodes.push_back({dom.ax + w * i / nx, dom.ay + h * j / ny});
  std::vector<std::array<Index, 3>> tris;
  structured_triangles(nx, ny, tris);
  return Mesh(Region::Macro, std::move(nodes), std::move(tris));
}

std::array<int, 2> tile_counts(const MacroDomain& dom, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  const auto count = [epsilon](double len) {
    const double k = len / epsilon;
    const double kr = std::round(k);
    if (kr < 1.0 || std::abs(k - kr) > 1e-9 * std::max(1.0, kr)) {
      std::ostringstream msg;
      msg << "epsilon " << epsilon << " does not tile a side of length " << len;
      throw Error(ErrorCode::TilingMismatch, msg.str());
    }
    return static_cast<int>(kr);
  };
  if (!(dom.width() > 0.0 && dom.height() > 0.0))
    throw Error(ErrorCode::MeshDegenerate, "macro domain has non-positive extent");
  return {count(dom.width()), count(dom.height())};
}

Mesh build_perforated_mesh(const MacroDomain& dom, double epsilon, const CellGeometry& geom) {
  const auto [kx, ky] = tile_counts(dom, epsilon);
  const Mesh cell = build_unit_cell_mesh(geom);
  const int n = geom.resolution;
  const long lx = static_cast<long>(kx) * n, ly = static_cast<long>(ky) * n;
  const double w = dom.width(), h = dom.height();

  // Lattice nodes are keyed by global lattice index so shared tile edges merge.
  std::map<std::pair<long, long>, Index> lattice;
  std::vector<Vec2> nodes;
  std::vector<std::array<Index, 3>> tris;
  std::vector<Index> local(static_cast<std::size_t>(cell.num_nodes()));
  for (int tj = 0; tj < ky; ++tj) {
    for (int ti = 0; ti < kx; ++ti) {
      for (Index v = 0; v < cell.num_nodes(); ++v) {
        const Vec2 p = cell.node(v);
        const double fx = p.x * n, fy = p.y * n;
        const long ix = std::lround(fx), iy = std::lround(fy);
        if (std::abs(fx - ix) < 1e-9 && std::abs(fy - iy) < 1e-9) {
          const long gx = ti * static_cast<long>(n) + ix, gy = tj * static_cast<long>(n) + iy;
          auto [it, fresh] = lattice.try_emplace({gx, gy}, static_cast<Index>(nodes.size()));
          if (fresh)
            nodes.push_back({dom.ax + w * static_cast<double>(gx) / static_cast<double>(lx),
                             dom.ay + h * static_cast<double>(gy) / static_cast<double>(ly)});
          local[v] = it->second;
        } else {
          local[v] = static_cast<Index>(nodes.size());
          nodes.push_back({dom.ax + epsilon * (ti + p.x), dom.ay + epsilon * (tj + p.y)});
        }
      }
      for (const auto& t : cell.triangles()) tris.push_back({local[t[0]], local[t[1]], local[t[2]]});
    }
  }

  // Row-major (y, then x) ordering, matching build_macro_mesh for r = 0.
  std::vector<Index> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const Vec2 pa = nodes[a], pb = nodes[b];
    return pa.y != pb.y ? pa.y < pb.y : pa.x < pb.x;
  });
  std::vector<Index> rank(nodes.size());
  std::vector<Vec2> sorted(nodes.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    rank[order[k]] = static_cast<Index>(k);
    sorted[k] = nodes[order[k]];
  }
  for (auto& t : tris)
    for (Index& v : t) v = rank[v];
  return Mesh(Region::Perforated, std::move(sorted), std::move(tris));
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh), lo_(mesh.min_corner()) {
  const Vec2 hi = mesh.max_corner();
  const double w = std::max(hi.x - lo_.x, 1e-300), h = std::max(hi.y - lo_.y, 1e-300);
  cell_ = std::max(std::sqrt(w * h / mesh.num_triangles()) * 2.0, 1e-300);
  nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
  ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
  buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    Vec2 a = mesh.node(tri[0]), b = a;
    for (Index v : tri) {
      const Vec2 p = mesh.node(v);
      a = {std::min(a.x, p.x), std::min(a.y, p.y)};
      b = {std::max(b.x, p.x), std::max(b.y, p.y)};
    }
    const int i0 = std::clamp(static_cast<int>((a.x - lo_.x) / cell_), 0, nx_ - 1);
    const int i1 = std::clamp(static_cast<int>((b.x - lo_.x) / cell_), 0, nx_ - 1);
    const int j0 = std::clamp(static_cast<int>((a.y - lo_.y) / cell_), 0, ny_ - 1);
    const int j1 = std::clamp(static_cast<int>((b.y - lo_.y) / cell_), 0, ny_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j * nx_ + i)].push_back(t);
  }
}

namespace {

std::array<double, 3> barycentric(Vec2 a, Vec2 b, Vec2 c, Vec2 p) {
  const double det = cross(b - a, c - a);
  const double l1 = cross(p - a, c - a) / det;
  const double l2 = cross(b - a, p - a) / det;
  return {1.0 - l1 - l2, l1, l2};
}

// Closest point of segment [a,b] to p, as the parameter t in [0,1].
double segment_param(Vec2 a, Vec2 b, Vec2 p) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  return len2 > 0.0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
}

}  // namespace

std::optional<PointLocator::Hit> PointLocator::locate(Vec2 p, double snap) const {
  const auto bucket_range = [&](double lo, double v, int count) {
    return std::clamp(static_cast<int>(std::floor((v - lo) / cell_)), 0, count - 1);
  };
  constexpr double kInside = -1e-12;
  const int bi = bucket_range(lo_.x, p.x, nx_), bj = bucket_range(lo_.y, p.y, ny_);
  for (Index t : buckets_[static_cast<std::size_t>(bj * nx_ + bi)]) {
    const auto& tri = mesh_->triangle(t);
    const auto l = barycentric(mesh_->node(tri[0]), mesh_->node(tri[1]), mesh_->node(tri[2]), p);
    if (l[0] >= kInside && l[1] >= kInside && l[2] >= kInside) return Hit{t, l, 0.0};
  }
  if (snap <= 0.0) return std::nullopt;

  std::optional<Hit> best;
  const int reach = static_cast<int>(std::ceil(snap / cell_));
  for (int j = std::max(0, bj - reach); j <= std::min(ny_ - 1, bj + reach); ++j) {
    for (int i = std::max(0, bi - reach); i <= std::min(nx_ - 1, bi + reach); ++i) {
      for (Index t : buckets_[static_cast<std::size_t>(j * nx_ + i)]) {
        const auto& tri = mesh_->triangle(t);
        const Vec2 a = mesh_->node(tri[0]), b = mesh_->node(tri[1]), c = mesh_->node(tri[2]);
        auto l = barycentric(a, b, c, p);
        if (l[0] >= kInside && l[1] >= kInside && l[2] >= kInside) return Hit{t, l, 0.0};
        // Nearest point lies on one of the edges.
        const std::array<Vec2, 3> v{a, b, c};
        for (int k = 0; k < 3; ++k) {
          const double s = segment_param(v[k], v[(k + 1) % 3], p);
          const Vec2 q = v[k] + s * (v[(k + 1) % 3] - v[k]);
          const double dist = norm(p - q);
          if (dist <= snap && (!best || dist < best->distance)) {
            std::array<double, 3> bary{0.0, 0.0, 0.0};
            bary[k] = 1.0 - s;
            bary[(k + 1) % 3] = s;
            best = Hit{t, bary, dist};
          }
        }
      }
    }
  }
  return best;
}

void write_vtk(std::ostream& os, const Mesh& mesh, const std::vector<NamedField>& point_data,
               const char* title) {
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_nodes() << " double\n";
  for (Vec2 p : mesh.nodes()) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << mesh.num_triangles() << ' ' << 4 * mesh.num_triangles() << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << mesh.num_triangles() << '\n';
  for (Index t = 0; t < mesh.num_triangles(); ++t) os << "5\n";  // VTK_TRIANGLE
  if (point_data.empty()) return;
  os << "POINT_DATA " << mesh.num_nodes() << '\n';
  for (const auto& f : point_data) {
    if (f.values->size() != static_cast<std::size_t>(mesh.num_nodes()))
      throw Error(ErrorCode::MeshMismatch, std::string("field ") + f.name + " has wrong length");
    os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (double x : *f.values) os << x << '\n';
  }
}

}  // namespace perfrac
