#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "perfrac/geometry.hpp"
#include "perfrac/types.hpp"

namespace perfrac {

using Vector = std::vector<double>;

/// Nodal P1 function on a shared, immutable mesh.
struct Field {
  std::shared_ptr<const Mesh> mesh;
  Vector values;

  static Field constant(std::shared_ptr<const Mesh> mesh, double c);
  static Field interpolate(std::shared_ptr<const Mesh> mesh, const std::function<double(Vec2)>& f);

  Index size() const { return static_cast<Index>(values.size()); }
  double operator[](Index i) const { return values[static_cast<std::size_t>(i)]; }
};

/// Area and P1 basis gradients of one triangle.
struct ElementData {
  double area;
  std::array<Vec2, 3> grad;
};
std::vector<ElementData> element_data(const Mesh& mesh);

/// Piecewise-constant gradient of a P1 field on each triangle.
std::vector<Vec2> element_gradients(const Mesh& mesh, std::span<const double> values);

/// Vertex-lumped mass: one third of the area of every incident triangle.
Vector lumped_mass(const Mesh& mesh);

/// Symmetric sparse matrix in CSR form (both triangles stored).
class SparseOperator {
 public:
  struct Triplet {
    Index row, col;
    double value;
  };

  SparseOperator() = default;
  SparseOperator(Index dim, std::vector<Triplet> triplets);

  Index dimension() const { return dim_; }
  const std::vector<Index>& row_start() const { return row_start_; }
  const std::vector<Index>& columns() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }
  std::vector<double>& mutable_values() { return vals_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  Vector apply(std::span<const double> x) const;
  Vector diagonal() const;
  double entry(Index row, Index col) const;
  bool is_symmetric(double rel_tol = 1e-12) const;
  double max_abs() const;

 private:
  Index dim_ = 0;
  std::vector<Index> row_start_{0};
  std::vector<Index> cols_;
  std::vector<double> vals_;
};

/// Weight of the stiffness form: scale * (element mean of nodal weight) * tensor.
struct CoefficientSpec {
  std::optional<Vector> nodal_weight;
  Mat2 tensor = Mat2::identity();
  double scale = 1.0;

  static CoefficientSpec constant(double c) { return {std::nullopt, Mat2::identity(), c}; }
  static CoefficientSpec matrix(const Mat2& m) { return {std::nullopt, m, 1.0}; }
  static CoefficientSpec weighted(Vector w, const Mat2& m = Mat2::identity()) {
    return {std::move(w), m, 1.0};
  }
};

/// Stiffness assembly with the sparsity pattern and the unweighted element
/// matrices cached, so repeated reassembly with new weights is cheap.
class StiffnessAssembler {
 public:
  StiffnessAssembler(const Mesh& mesh, const Mat2& tensor);

  /// Element weights are the mean of `nodal_weight` over each triangle's vertices.
  SparseOperator assemble(std::span<const double> nodal_weight, double scale = 1.0) const;
  SparseOperator assemble(double scale = 1.0) const;

 private:
  SparseOperator pattern_;
  std::vector<std::array<double, 6>> local_;    // upper triangle of the 3x3 element matrix
  std::vector<std::array<Index, 9>> slots_;     // CSR positions of the 3x3 entries
  std::vector<std::array<Index, 3>> triangles_;
};

SparseOperator assemble_stiffness(const Mesh& mesh, const CoefficientSpec& coeff);

struct ConstrainedSystem {
  SparseOperator op;
  Vector rhs;
};

/// Symmetric elimination of the nodes where `mask` is set, fixing them to `values`.
ConstrainedSystem apply_dirichlet(const SparseOperator& op, std::span<const double> rhs,
                                  std::span<const double> values, const std::vector<bool>& mask);

/// Periodic system: slave nodes folded onto their master degree of freedom.
struct PeriodicSystem {
  SparseOperator op;
  Vector rhs;
  std::vector<Index> dof_of_node;
  Index num_dofs = 0;

  Vector expand(std::span<const double> dofs) const;
  Vector fold(std::span<const double> nodal) const;  // P^T applied to a nodal vector
};

PeriodicSystem apply_periodic(const SparseOperator& op, std::span<const double> rhs,
                              const std::vector<PeriodicPair>& pairs);

/// Solve with degree of freedom 0 pinned to zero; the caller fixes the gauge.
Vector solve_pinned(const PeriodicSystem& system, double tol);

/// Subtract the area-weighted mean so that the integral over the mesh vanishes.
void remove_mean(const Mesh& mesh, std::span<double> values);
double integral(const Mesh& mesh, std::span<const double> values);

struct SolveOptions {
  double tol = 1e-10;   // relative residual
  Index max_iter = 0;   // 0 -> 50 * dimension
};

struct SolveResult {
  Vector x;
  Index iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. A supplied initial guess makes
/// every iterate lower the quadratic energy monotonically.
SolveResult solve_spd(const SparseOperator& op, std::span<const double> rhs, const SolveOptions& opts = {},
                      std::optional<std::span<const double>> x0 = std::nullopt);

struct BoxOptions {
  double tol = 1e-10;          // on the (scaled) KKT residual
  Index max_sweeps = 0;        // 0 -> 100 * dimension
  double relaxation = 1.0;     // 1 = projected Gauss-Seidel, (1,2) = projected SOR
  std::optional<Vector> residual_scale;  // residual_i is divided by scale_i
};

struct KktReport {
  double interior = 0.0;       // max |r_i| over strictly free nodes
  double upper_sign = 0.0;     // max(0, r_i) over nodes at the upper bound
  double lower_sign = 0.0;     // max(0, -r_i) over nodes at the lower bound
  Index num_upper = 0;
  Index num_lower = 0;

  double worst() const { return std::max({interior, upper_sign, lower_sign}); }
};

/// KKT conditions of min 1/2 z'Kz - b'z over lower <= z <= upper, with r = Kz - b.
KktReport kkt_report(const SparseOperator& op, std::span<const double> rhs, std::span<const double> z,
                     std::span<const double> lower, std::span<const double> upper,
                     std::optional<std::span<const double>> scale = std::nullopt);

struct BoxResult {
  Vector x;
  Index sweeps = 0;
  KktReport kkt;
};

/// Projected Gauss-Seidel (optionally over-relaxed). Starting from a feasible
/// point, each coordinate update lowers the quadratic energy.
BoxResult solve_box_constrained(const SparseOperator& op, std::span<const double> rhs,
                                std::span<const double> lower, std::span<const double> upper,
                                const BoxOptions& opts = {},
                                std::optional<std::span<const double>> x0 = std::nullopt);

double quadratic_form(const SparseOperator& op, std::span<const double> a, std::span<const double> b);

/// 1/2 * sum_T |T| (mean_T(v^2) + eta) (M grad u) . grad u
double elastic_energy(const Field& u, const Field& v, double eta, const Mat2& tensor);
/// sum_i m_i (1 - v_i)^2 / (4 gamma) + gamma * sum_T |T| (M grad v) . grad v
double surface_energy(const Field& v, double gamma, const Mat2& tensor);
/// The (1-v)^2/(4 gamma) part of surface_energy alone.
double damage_energy(const Field& v, double gamma);

double l2_norm(const Field& f);
double h1_seminorm(const Field& f, const Mat2& tensor = Mat2::identity());

void require_same_mesh(const Field& a, const Field& b);

}  // namespace perfrac
