#include "perfrac/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "perfrac/error.hpp"

namespace perfrac {

Field Field::constant(std::shared_ptr<const Mesh> mesh, double c) {
  const auto n = static_cast<std::size_t>(mesh->num_nodes());
  return {std::move(mesh), Vector(n, c)};
}

Field Field::interpolate(std::shared_ptr<const Mesh> mesh, const std::function<double(Vec2)>& f) {
  Vector values;
  values.reserve(static_cast<std::size_t>(mesh->num_nodes()));
  for (Vec2 p : mesh->nodes()) values.push_back(f(p));
  return {std::move(mesh), std::move(values)};
}

void require_same_mesh(const Field& a, const Field& b) {
  if (a.mesh != b.mesh || a.values.size() != b.values.size())
    throw Error(ErrorCode::MeshMismatch, "fields live on different meshes");
}

namespace {

void require_size(const Mesh& mesh, std::size_t n, const char* what) {
  if (n != static_cast<std::size_t>(mesh.num_nodes()))
    throw Error(ErrorCode::MeshMismatch, std::string(what) + " length does not match the mesh");
}

void require_field(const Field& f) {
  if (!f.mesh) throw Error(ErrorCode::MeshMismatch, "field has no mesh");
  require_size(*f.mesh, f.values.size(), "field");
}

}  // namespace

std::vector<ElementData> element_data(const Mesh& mesh) {
  std::vector<ElementData> out;
  out.reserve(static_cast<std::size_t>(mesh.num_triangles()));
  for (const auto& t : mesh.triangles()) {
    const Vec2 a = mesh.node(t[0]), b = mesh.node(t[1]), c = mesh.node(t[2]);
    const double twice = cross(b - a, c - a);
    // grad(phi_k) = rot90(opposite edge) / (2|T|)
    const auto g = [twice](Vec2 p, Vec2 q) { return Vec2{(p.y - q.y) / twice, (q.x - p.x) / twice}; };
    out.push_back({0.5 * twice, {g(b, c), g(c, a), g(a, b)}});
  }
  return out;
}

std::vector<Vec2> element_gradients(const Mesh& mesh, std::span<const double> values) {
  require_size(mesh, values.size(), "nodal vector");
  const auto elems = element_data(mesh);
  std::vector<Vec2> out(elems.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const auto& t = mesh.triangles()[e];
    Vec2 g{};
    for (int k = 0; k < 3; ++k) g = g + values[static_cast<std::size_t>(t[k])] * elems[e].grad[k];
    out[e] = g;
  }
  return out;
}

Vector lumped_mass(const Mesh& mesh) {
  Vector m(static_cast<std::size_t>(mesh.num_nodes()), 0.0);
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const double third = mesh.signed_area(t) / 3.0;
    for (Index v : mesh.triangle(t)) m[static_cast<std::size_t>(v)] += third;
  }
  return m;
}

SparseOperator::SparseOperator(Index dim, std::vector<Triplet> triplets) : dim_(dim) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  row_start_.assign(static_cast<std::size_t>(dim) + 1, 0);
  cols_.reserve(triplets.size());
  vals_.reserve(triplets.size());
  Index last_row = -1, last_col = -1;
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= dim || t.col < 0 || t.col >= dim)
      throw Error(ErrorCode::InvalidArgument, "sparse entry out of range");
    if (t.row == last_row && t.col == last_col) {
      vals_.back() += t.value;
      continue;
    }
    cols_.push_back(t.col);
    vals_.push_back(t.value);
    ++row_start_[static_cast<std::size_t>(t.row) + 1];
    last_row = t.row;
    last_col = t.col;
  }
  std::partial_sum(row_start_.begin(), row_start_.end(), row_start_.begin());
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const {
  for (Index i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (Index k = row_start_[i]; k < row_start_[i + 1]; ++k) s += vals_[k] * x[static_cast<std::size_t>(cols_[k])];
    y[static_cast<std::size_t>(i)] = s;
  }
}

Vector SparseOperator::apply(std::span<const double> x) const {
  Vector y(static_cast<std::size_t>(dim_));
  apply(x, y);
  return y;
}

Vector SparseOperator::diagonal() const {
  Vector d(static_cast<std::size_t>(dim_), 0.0);
  for (Index i = 0; i < dim_; ++i) d[static_cast<std::size_t>(i)] = entry(i, i);
  return d;
}

double SparseOperator::entry(Index row, Index col) const {
  const auto first = cols_.begin() + row_start_[row];
  const auto last = cols_.begin() + row_start_[row + 1];
  const auto it = std::lower_bound(first, last, col);
  return (it != last && *it == col) ? vals_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
}

double SparseOperator::max_abs() const {
  double m = 0.0;
  for (double v : vals_) m = std::max(m, std::abs(v));
  return m;
}

bool SparseOperator::is_symmetric(double rel_tol) const {
  const double scale = std::max(max_abs(), 1e-300);
  for (Index i = 0; i < dim_; ++i)
    for (Index k = row_start_[i]; k < row_start_[i + 1]; ++k)
      if (std::abs(vals_[k] - entry(cols_[k], i)) > rel_tol * scale) return false;
  return true;
}

StiffnessAssembler::StiffnessAssembler(const Mesh& mesh, const Mat2& tensor) : triangles_(mesh.triangles()) {
  const auto elems = element_data(mesh);
  std::vector<SparseOperator::Triplet> trip;
  trip.reserve(triangles_.size() * 9);
  local_.reserve(triangles_.size());
  for (std::size_t e = 0; e < elems.size(); ++e) {
    const auto& g = elems[e].grad;
    std::array<double, 6> loc{};
    int k = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) loc[k++] = elems[e].area * dot(tensor * g[b], g[a]);
    local_.push_back(loc);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.push_back({triangles_[e][a], triangles_[e][b], 0.0});
  }
  pattern_ = SparseOperator(mesh.num_nodes(), std::move(trip));
  const auto& rs = pattern_.row_start();
  const auto& cols = pattern_.columns();
  slots_.reserve(triangles_.size());
  for (const auto& t : triangles_) {
    std::array<Index, 9> s{};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const auto first = cols.begin() + rs[t[a]], last = cols.begin() + rs[t[a] + 1];
        s[3 * a + b] = static_cast<Index>(std::lower_bound(first, last, t[b]) - cols.begin());
      }
    slots_.push_back(s);
  }
}

SparseOperator StiffnessAssembler::assemble(std::span<const double> nodal_weight, double scale) const {
  SparseOperator op = pattern_;
  auto& vals = op.mutable_values();
  static constexpr int kUpper[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  for (std::size_t e = 0; e < triangles_.size(); ++e) {
    const auto& t = triangles_[e];
    double w = scale;
    if (!nodal_weight.empty())
      w *= (nodal_weight[static_cast<std::size_t>(t[0])] + nodal_weight[static_cast<std::size_t>(t[1])] +
            nodal_weight[static_cast<std::size_t>(t[2])]) / 3.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) vals[static_cast<std::size_t>(slots_[e][3 * a + b])] += w * local_[e][kUpper[a][b]];
  }
  return op;
}

SparseOperator StiffnessAssembler::assemble(double scale) const { return assemble({}, scale); }

SparseOperator assemble_stiffness(const Mesh& mesh, const CoefficientSpec& coeff) {
  if (!coeff.tensor.is_spd()) throw Error(ErrorCode::InvalidArgument, "coefficient tensor is not SPD");
  const StiffnessAssembler assembler(mesh, coeff.tensor);
  if (!coeff.nodal_weight) return assembler.assemble(coeff.scale);
  require_size(mesh, coeff.nodal_weight->size(), "coefficient field");
  return assembler.assemble(*coeff.nodal_weight, coeff.scale);
}

ConstrainedSystem apply_dirichlet(const SparseOperator& op, std::span<const double> rhs,
                                  std::span<const double> values, const std::vector<bool>& mask) {
  const auto n = static_cast<std::size_t>(op.dimension());
  if (rhs.size() != n || values.size() != n || mask.size() != n)
    throw Error(ErrorCode::MeshMismatch, "Dirichlet data length does not match the operator");
  ConstrainedSystem sys{op, Vector(rhs.begin(), rhs.end())};
  const auto& rs = sys.op.row_start();
  const auto& cols = sys.op.columns();
  auto& vals = sys.op.mutable_values();
  for (std::size_t i = 0; i < n; ++i) {
    for (Index k = rs[i]; k < rs[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(cols[k]);
      if (mask[i]) {
        vals[k] = (j == i) ? 1.0 : 0.0;
      } else if (mask[j]) {
        sys.rhs[i] -= vals[k] * values[j];
        vals[k] = 0.0;
      }
    }
    if (mask[i]) sys.rhs[i] = values[i];
  }
  return sys;
}

Vector PeriodicSystem::expand(std::span<const double> dofs) const {
  Vector out(dof_of_node.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dofs[static_cast<std::size_t>(dof_of_node[i])];
  return out;
}

Vector PeriodicSystem::fold(std::span<const double> nodal) const {
  Vector out(static_cast<std::size_t>(num_dofs), 0.0);
  for (std::size_t i = 0; i < dof_of_node.size(); ++i) out[static_cast<std::size_t>(dof_of_node[i])] += nodal[i];
  return out;
}

PeriodicSystem apply_periodic(const SparseOperator& op, std::span<const double> rhs,
                              const std::vector<PeriodicPair>& pairs) {
  const auto n = static_cast<std::size_t>(op.dimension());
  if (rhs.size() != n) throw Error(ErrorCode::MeshMismatch, "rhs length does not match the operator");
  // Union-find; the smallest node index represents each class (corners chain).
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index{0});
  const auto find = [&parent](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& p : pairs) {
    if (p.master < 0 || p.slave < 0 || static_cast<std::size_t>(std::max(p.master, p.slave)) >= n)
      throw Error(ErrorCode::MeshMismatch, "periodic pair references a missing node");
    const Index a = find(p.master), b = find(p.slave);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  PeriodicSystem sys;
  sys.dof_of_node.assign(n, -1);
  std::vector<Index> dof_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const Index root = find(static_cast<Index>(i));
    if (dof_of_root[root] < 0) dof_of_root[root] = sys.num_dofs++;
    sys.dof_of_node[i] = dof_of_root[root];
  }
  std::vector<SparseOperator::Triplet> trip;
  trip.reserve(op.values().size());
  const auto& rs = op.row_start();
  for (std::size_t i = 0; i < n; ++i)
    for (Index k = rs[i]; k < rs[i + 1]; ++k)
      trip.push_back({sys.dof_of_node[i], sys.dof_of_node[op.columns()[k]], op.values()[k]});
  sys.op = SparseOperator(sys.num_dofs, std::move(trip));
  sys.rhs = sys.fold(rhs);
  return sys;
}

Vector solve_pinned(const PeriodicSystem& system, double tol) {
  SparseOperator op = system.op;
  const auto& rs = op.row_start();
  const auto& cols = op.columns();
  auto& vals = op.mutable_values();
  for (Index i = 0; i < op.dimension(); ++i)
    for (Index k = rs[i]; k < rs[i + 1]; ++k)
      if (i == 0 || cols[k] == 0) vals[k] = (i == cols[k]) ? 1.0 : 0.0;
  Vector rhs = system.rhs;
  rhs[0] = 0.0;
  return solve_spd(op, rhs, {tol, 0}).x;
}

double integral(const Mesh& mesh, std::span<const double> values) {
  require_size(mesh, values.size(), "nodal vector");
  double s = 0.0;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    s += mesh.signed_area(t) *
         (values[static_cast<std::size_t>(tri[0])] + values[static_cast<std::size_t>(tri[1])] +
          values[static_cast<std::size_t>(tri[2])]) / 3.0;
  }
  return s;
}

void remove_mean(const Mesh& mesh, std::span<double> values) {
  const double mean = integral(mesh, values) / mesh.total_area();
  for (double& v : values) v -= mean;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SolveResult solve_spd(const SparseOperator& op, std::span<const double> rhs, const SolveOptions& opts,
                      std::optional<std::span<const double>> x0) {
  const auto n = static_cast<std::size_t>(op.dimension());
  if (rhs.size() != n) throw Error(ErrorCode::MeshMismatch, "rhs length does not match the operator");
  SolveResult res;
  res.x = x0 ? Vector(x0->begin(), x0->end()) : Vector(n, 0.0);
  const double bnorm = std::sqrt(dot(rhs, rhs));
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    return res;
  }
  Vector diag = op.diagonal();
  for (double& d : diag) {
    if (!(d > 0.0)) throw Error(ErrorCode::SingularSystem, "non-positive diagonal entry");
    d = 1.0 / d;
  }
  Vector r(n), z(n), p(n), q(n);
  op.apply(res.x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  double rnorm = std::sqrt(dot(r, r));
  const Index cap = opts.max_iter > 0 ? opts.max_iter : 50 * op.dimension();
  for (std::size_t i = 0; i < n; ++i) p[i] = z[i] = diag[i] * r[i];
  double rz = dot(r, z);
  while (rnorm > opts.tol * bnorm) {
    if (res.iterations >= cap) {
      std::ostringstream msg;
      msg << "conjugate gradients stalled at relative residual " << rnorm / bnorm << " after " << cap
          << " iterations";
      throw Error(ErrorCode::NoConvergence, msg.str());
    }
    op.apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw Error(ErrorCode::SingularSystem, "operator is not positive definite");
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = diag[i] * r[i];
    }
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = std::sqrt(dot(r, r));
    ++res.iterations;
  }
  res.relative_residual = rnorm / bnorm;
  return res;
}

KktReport kkt_report(const SparseOperator& op, std::span<const double> rhs, std::span<const double> z,
                     std::span<const double> lower, std::span<const double> upper,
                     std::optional<std::span<const double>> scale) {
  const Vector kz = op.apply(z);
  KktReport rep;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double r = kz[i] - rhs[i];
    if (scale) r /= (*scale)[i];
    if (lower[i] == upper[i]) continue;
    if (z[i] >= upper[i]) {
      rep.upper_sign = std::max(rep.upper_sign, r);
      ++rep.num_upper;
    } else if (z[i] <= lower[i]) {
      rep.lower_sign = std::max(rep.lower_sign, -r);
      ++rep.num_lower;
    } else {
      rep.interior = std::max(rep.interior, std::abs(r));
    }
  }
  return rep;
}

BoxResult solve_box_constrained(const SparseOperator& op, std::span<const double> rhs,
                                std::span<const double> lower, std::span<const double> upper,
                                const BoxOptions& opts, std::optional<std::span<const double>> x0) {
  const auto n = static_cast<std::size_t>(op.dimension());
  if (rhs.size() != n || lower.size() != n || upper.size() != n || (x0 && x0->size() != n))
    throw Error(ErrorCode::MeshMismatch, "box problem vectors do not match the operator");
  if (opts.residual_scale && opts.residual_scale->size() != n)
    throw Error(ErrorCode::MeshMismatch, "residual scale length does not match the operator");
  for (std::size_t i = 0; i < n; ++i)
    if (lower[i] > upper[i]) {
      std::ostringstream msg;
      msg << "lower bound exceeds upper bound at dof " << i;
      throw Error(ErrorCode::InfeasibleBounds, msg.str());
    }
  if (!(opts.relaxation > 0.0 && opts.relaxation < 2.0))
    throw Error(ErrorCode::InvalidArgument, "relaxation must lie in (0, 2)");

  BoxResult res;
  res.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.x[i] = std::clamp(x0 ? (*x0)[i] : 0.0, lower[i], upper[i]);
  const Vector diag = op.diagonal();
  for (double d : diag)
    if (!(d > 0.0)) throw Error(ErrorCode::SingularSystem, "non-positive diagonal entry");

  std::optional<std::span<const double>> scale;
  if (opts.residual_scale) scale = std::span<const double>(*opts.residual_scale);
  const auto& rs = op.row_start();
  const auto& cols = op.columns();
  const auto& vals = op.values();
  const Index cap = opts.max_sweeps > 0 ? opts.max_sweeps : 100 * op.dimension();
  const double omega = opts.relaxation;

  res.kkt = kkt_report(op, rhs, res.x, lower, upper, scale);
  while (res.kkt.worst() > opts.tol) {
    if (res.sweeps >= cap) {
      std::ostringstream msg;
      msg << "projected Gauss-Seidel stalled at KKT residual " << res.kkt.worst() << " after " << cap
          << " sweeps";
      throw Error(ErrorCode::NoConvergence, msg.str());
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (lower[i] == upper[i]) {
        res.x[i] = lower[i];
        continue;
      }
      double r = rhs[i];
      for (Index k = rs[i]; k < rs[i + 1]; ++k) r -= vals[k] * res.x[static_cast<std::size_t>(cols[k])];
      res.x[i] = std::clamp(res.x[i] + omega * r / diag[i], lower[i], upper[i]);
    }
    ++res.sweeps;
    res.kkt = kkt_report(op, rhs, res.x, lower, upper, scale);
  }
  return res;
}

double quadratic_form(const SparseOperator& op, std::span<const double> a, std::span<const double> b) {
  const Vector kb = op.apply(b);
  return dot(a, kb);
}

double elastic_energy(const Field& u, const Field& v, double eta, const Mat2& tensor) {
  require_field(u);
  require_same_mesh(u, v);
  const Mesh& mesh = *u.mesh;
  const auto grads = element_gradients(mesh, u.values);
  double e = 0.0;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    double w = 0.0;
    for (Index k : tri) w += v[k] * v[k];
    w = w / 3.0 + eta;
    const Vec2 g = grads[static_cast<std::size_t>(t)];
    e += mesh.signed_area(t) * w * dot(tensor * g, g);
  }
  return 0.5 * e;
}

double damage_energy(const Field& v, double gamma) {
  require_field(v);
  const Vector m = lumped_mass(*v.mesh);
  double e = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) e += m[i] * (1.0 - v.values[i]) * (1.0 - v.values[i]);
  return e / (4.0 * gamma);
}

double surface_energy(const Field& v, double gamma, const Mat2& tensor) {
  require_field(v);
  const Mesh& mesh = *v.mesh;
  const auto grads = element_gradients(mesh, v.values);
  double g = 0.0;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const Vec2 d = grads[static_cast<std::size_t>(t)];
    g += mesh.signed_area(t) * dot(tensor * d, d);
  }
  return damage_energy(v, gamma) + gamma * g;
}

double l2_norm(const Field& f) {
  require_field(f);
  const Mesh& mesh = *f.mesh;
  double s = 0.0;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const double a = f[tri[0]], b = f[tri[1]], c = f[tri[2]];
    // exact for P1: |T|/12 * (sum u_i^2 + (sum u_i)^2)
    s += mesh.signed_area(t) / 12.0 * (a * a + b * b + c * c + (a + b + c) * (a + b + c));
  }
  return std::sqrt(s);
}

double h1_seminorm(const Field& f, const Mat2& tensor) {
  require_field(f);
  const auto grads = element_gradients(*f.mesh, f.values);
  double s = 0.0;
  for (Index t = 0; t < f.mesh->num_triangles(); ++t) {
    const Vec2 g = grads[static_cast<std::size_t>(t)];
    s += f.mesh->signed_area(t) * dot(tensor * g, g);
  }
  return std::sqrt(s);
}

}  // namespace perfrac
