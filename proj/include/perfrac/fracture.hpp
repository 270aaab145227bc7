#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "perfrac/fem.hpp"

namespace perfrac {

/// Parameters of the regularized fracture energy
///   E(u,v) = 1/2 int (v^2 + eta) (M grad u) . grad u
///   H(v)   = int (1-v)^2 / (4 gamma) + gamma (M grad v) . grad v
/// and of the alternate-minimization driver.
struct ModelParams {
  double gamma = 0.1;
  double eta = 1e-5;
  Mat2 tensor = Mat2::identity();  // M0 for the homogenized model, I for the fine one
  int steps = 50;
  double altmin_tol = 1e-6;   // max nodal change of v between sweeps
  int altmin_max_iters = 2000;
  double solver_tol = 1e-10;  // relative residual of the u solves
  double kkt_tol = 1e-6;      // v-subproblem KKT residual, in strong (mass-scaled) form
  double relaxation = 0.0;    // projected SOR factor; 0 picks one from the mesh size
  bool freeze_v = false;      // elastic-only runs: v stays at its initial value

  void validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Boundary datum g(x, s) and its pseudo-time derivative.
struct LoadProgram {
  std::string name;
  std::function<double(Vec2, double)> g;
  std::function<double(Vec2, double)> g_s;

  static LoadProgram zero();
  static LoadProgram uniaxial(double amplitude = 1.0);           // a s x1
  static LoadProgram shear(double amplitude = 1.0);              // a s x1 x2
  static LoadProgram surfing(double amplitude, double offset);   // a s max(0, x1 - c)
};

struct FractureState {
  double s = 0.0;
  Field u, v;
  double E = 0.0, H = 0.0;
  double work_accum = 0.0;
  double balance_residual = 0.0;
};

struct StepRecord {
  int step = 0;
  double s = 0.0;
  double E = 0.0, H = 0.0, total = 0.0;
  double work_accum = 0.0;
  double balance_residual = 0.0;
  int altmin_iters = 0;
  double min_v = 0.0;
  double max_v_increase = 0.0;      // max_i v_k(i) - v_{k-1}(i)
  double max_energy_increase = 0.0; // worst relative increase over the half-steps
  KktReport kkt;                    // v-subproblem at the returned pair
};

struct Trajectory {
  std::vector<StepRecord> records;
  double monotonicity_certificate = 0.0;  // max over steps of max_v_increase
  FractureState final_state;
};

struct AltMinResult {
  Field u, v;
  int iterations = 0;
  double max_energy_increase = 0.0;
  std::vector<double> energies;  // total energy after every half-step, starting point first
  KktReport kkt;
};

using StepObserver = std::function<void(const StepRecord&, const Field& u, const Field& v)>;

/// Quasi-static regularized fracture evolution on one mesh with one tensor.
/// The homogenized model (tensor M0, macro mesh) and the fine-scale model
/// (identity, perforated mesh) both run through this class.
class QuasiStaticSolver {
 public:
  QuasiStaticSolver(std::shared_ptr<const Mesh> mesh, ModelParams params);

  const ModelParams& params() const { return params_; }
  const std::shared_ptr<const Mesh>& mesh() const { return mesh_; }

  double energy_E(const Field& u, const Field& v) const;
  double energy_H(const Field& v) const;

  /// Field with g(., s) on OUTER nodes and `interior` elsewhere.
  Field boundary_lift(const LoadProgram& load, double s, const Field* interior = nullptr) const;

  /// Minimizer of E(., v) with u = g(., s) on the outer boundary. `guess`
  /// (interior values) warm-starts CG, which then lowers E monotonically.
  Field minimize_u(const Field& v, const LoadProgram& load, double s, const Field* guess = nullptr) const;

  /// Minimizer of E(u, .) + H(.) over 0 <= z <= upper, started from v_start.
  Field minimize_v(const Field& u, const Field& v_start, const Field& upper) const;

  /// Strong-form KKT residual -2 gamma div(M grad v) + v G - (1-v)/(2 gamma).
  KktReport v_kkt(const Field& u, const Field& v, const Field& upper) const;

  AltMinResult alternate_minimize(const Field& u_start, const Field& v_start, const Field& upper,
                                  const LoadProgram& load, double s) const;

  /// <(eta + v^2) M grad u, grad g_s(., s)> with the element quadrature of E.
  double load_power(const Field& u, const Field& v, const LoadProgram& load, double s) const;

  Trajectory evolve(const LoadProgram& load, const Field& v_init, const StepObserver& observer = {}) const;

 private:
  struct VProblem {
    SparseOperator op;
    Vector rhs;
  };
  VProblem v_problem(const Field& u) const;
  void require_mesh(const Field& f) const;

  std::shared_ptr<const Mesh> mesh_;
  ModelParams params_;
  StiffnessAssembler assembler_;
  SparseOperator gradient_form_;  // 2 gamma K_M
  std::vector<Index> diag_slot_;
  std::vector<ElementData> elements_;
  Vector mass_;
  std::vector<bool> outer_;
  double relaxation_ = 1.0;
};

/// Homogenized energies E0(u, v) and H0(v) with params.tensor = M0.
double energy_E0(const Field& u, const Field& v, const ModelParams& params);
double energy_H0(const Field& v, const ModelParams& params);

Field minimize_u(const Field& v, const LoadProgram& load, double s, const ModelParams& params);
Field minimize_v(const Field& u, const Field& v_prev, const ModelParams& params);
AltMinResult alternate_minimize(const FractureState& state, const Field& upper, const LoadProgram& load,
                                const ModelParams& params);
Trajectory evolve(const LoadProgram& load, const ModelParams& params, const Field& v_init,
                  const StepObserver& observer = {});

/// v_init = 1 except 0 on nodes within half a mesh size of the segment [a, b].
Field notched_damage(std::shared_ptr<const Mesh> mesh, Vec2 a, Vec2 b);

}  // namespace perfrac
