#include "perfrac/fracture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "perfrac/error.hpp"

namespace perfrac {

void ModelParams::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorCode::ValidationError, what); };
  if (!(gamma > 0.0)) fail("gamma must be positive");
  if (!(eta > 0.0 && eta < gamma)) fail("eta must satisfy 0 < eta < gamma");
  if (steps < 1) fail("steps must be at least 1");
  if (!(altmin_tol > 0.0)) fail("altmin_tol must be positive");
  if (altmin_max_iters < 1) fail("altmin_max_iters must be at least 1");
  if (!(solver_tol > 0.0)) fail("solver_tol must be positive");
  if (!(kkt_tol > 0.0)) fail("kkt_tol must be positive");
  if (!(relaxation == 0.0 || (relaxation > 0.0 && relaxation < 2.0))) fail("relaxation must be 0 or in (0, 2)");
  if (!tensor.is_spd()) fail("tensor must be symmetric positive definite");
}

LoadProgram LoadProgram::zero() {
  return {"zero", [](Vec2, double) { return 0.0; }, [](Vec2, double) { return 0.0; }};
}

LoadProgram LoadProgram::uniaxial(double a) {
  return {"uniaxial", [a](Vec2 x, double s) { return a * s * x.x; }, [a](Vec2 x, double) { return a * x.x; }};
}

LoadProgram LoadProgram::shear(double a) {
  return {"shear", [a](Vec2 x, double s) { return a * s * x.x * x.y; },
          [a](Vec2 x, double) { return a * x.x * x.y; }};
}

LoadProgram LoadProgram::surfing(double a, double c) {
  return {"surfing", [a, c](Vec2 x, double s) { return a * s * std::max(0.0, x.x - c); },
          [a, c](Vec2 x, double) { return a * std::max(0.0, x.x - c); }};
}

QuasiStaticSolver::QuasiStaticSolver(std::shared_ptr<const Mesh> mesh, ModelParams params)
    : mesh_(std::move(mesh)), params_(params), assembler_(*mesh_, params.tensor) {
  params_.validate();
  gradient_form_ = assembler_.assemble(2.0 * params_.gamma);
  const auto& rs = gradient_form_.row_start();
  const auto& cols = gradient_form_.columns();
  diag_slot_.resize(static_cast<std::size_t>(mesh_->num_nodes()));
  for (Index i = 0; i < mesh_->num_nodes(); ++i)
    diag_slot_[i] = static_cast<Index>(std::lower_bound(cols.begin() + rs[i], cols.begin() + rs[i + 1], i) -
                                       cols.begin());
  elements_ = element_data(*mesh_);
  mass_ = lumped_mass(*mesh_);
  outer_ = mesh_->nodes_with_tag(BoundaryTag::Outer);
  if (params_.relaxation > 0.0) {
    relaxation_ = params_.relaxation;
  } else {
    const double diam = norm(mesh_->max_corner() - mesh_->min_corner());
    relaxation_ = std::clamp(2.0 / (1.0 + std::numbers::pi * mesh_->max_edge_length() / diam), 1.0, 1.9);
  }
}

void QuasiStaticSolver::require_mesh(const Field& f) const {
  if (f.mesh != mesh_ || f.values.size() != static_cast<std::size_t>(mesh_->num_nodes()))
    throw Error(ErrorCode::MeshMismatch, "field does not live on the solver mesh");
}

double QuasiStaticSolver::energy_E(const Field& u, const Field& v) const {
  require_mesh(u);
  return elastic_energy(u, v, params_.eta, params_.tensor);
}

double QuasiStaticSolver::energy_H(const Field& v) const {
  require_mesh(v);
  return surface_energy(v, params_.gamma, params_.tensor);
}

Field QuasiStaticSolver::boundary_lift(const LoadProgram& load, double s, const Field* interior) const {
  Field out = interior ? *interior : Field::constant(mesh_, 0.0);
  if (interior) require_mesh(*interior);
  for (Index i = 0; i < mesh_->num_nodes(); ++i)
    if (outer_[i]) out.values[i] = load.g(mesh_->node(i), s);
  return out;
}

Field QuasiStaticSolver::minimize_u(const Field& v, const LoadProgram& load, double s, const Field* guess) const {
  require_mesh(v);
  Vector weight(v.values.size());
  for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = v.values[i] * v.values[i] + params_.eta;
  const SparseOperator k = assembler_.assemble(weight);
  const Field lift = boundary_lift(load, s, guess);
  const Vector zero(weight.size(), 0.0);
  const auto sys = apply_dirichlet(k, zero, lift.values, outer_);
  auto res = solve_spd(sys.op, sys.rhs, {params_.solver_tol, 0}, std::span<const double>(lift.values));
  return {mesh_, std::move(res.x)};
}

QuasiStaticSolver::VProblem QuasiStaticSolver::v_problem(const Field& u) const {
  require_mesh(u);
  VProblem p{gradient_form_, Vector(mass_.size())};
  auto& vals = p.op.mutable_values();
  Vector diag(mass_.size(), 0.0);
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const auto& tri = mesh_->triangles()[t];
    Vec2 g{};
    for (int k = 0; k < 3; ++k) g = g + u.values[static_cast<std::size_t>(tri[k])] * elements_[t].grad[k];
    const double third = elements_[t].area * dot(params_.tensor * g, g) / 3.0;
    for (Index k : tri) diag[static_cast<std::size_t>(k)] += third;
  }
  const double inv2g = 1.0 / (2.0 * params_.gamma);
  for (std::size_t i = 0; i < mass_.size(); ++i) {
    vals[static_cast<std::size_t>(diag_slot_[i])] += diag[i] + mass_[i] * inv2g;
    p.rhs[i] = mass_[i] * inv2g;
  }
  return p;
}

Field QuasiStaticSolver::minimize_v(const Field& u, const Field& v_start, const Field& upper) const {
  require_mesh(v_start);
  require_mesh(upper);
  const VProblem p = v_problem(u);
  const Vector lower(mass_.size(), 0.0);
  BoxOptions opts;
  opts.tol = params_.kkt_tol;
  opts.relaxation = relaxation_;
  opts.residual_scale = mass_;
  auto res = solve_box_constrained(p.op, p.rhs, lower, upper.values, opts, std::span<const double>(v_start.values));
  return {mesh_, std::move(res.x)};
}

KktReport QuasiStaticSolver::v_kkt(const Field& u, const Field& v, const Field& upper) const {
  require_mesh(v);
  require_mesh(upper);
  const VProblem p = v_problem(u);
  const Vector lower(mass_.size(), 0.0);
  return kkt_report(p.op, p.rhs, v.values, lower, upper.values, std::span<const double>(mass_));
}

AltMinResult QuasiStaticSolver::alternate_minimize(const Field& u_start, const Field& v_start,
                                                   const Field& upper, const LoadProgram& load, double s) const {
  AltMinResult res;
  res.u = boundary_lift(load, s, &u_start);
  res.v = v_start;
  const auto total = [&] { return energy_E(res.u, res.v) + energy_H(res.v); };
  res.energies.push_back(total());
  const auto record = [&](const char* half) {
    const double prev = res.energies.back();
    const double now = total();
    res.energies.push_back(now);
    const double rel = (now - prev) / std::max(std::abs(prev), std::numeric_limits<double>::min());
    res.max_energy_increase = std::max(res.max_energy_increase, rel);
    if (rel > 1e-12) {
      std::ostringstream msg;
      msg << half << " raised the total energy from " << prev << " to " << now;
      throw Error(ErrorCode::EnergyIncrease, msg.str());
    }
  };

  double change = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= params_.altmin_max_iters; ++it) {
    res.iterations = it;
    res.u = minimize_u(res.v, load, s, &res.u);
    record("u-minimization");
    if (params_.freeze_v) {
      change = 0.0;
      break;
    }
    Field v_next = minimize_v(res.u, res.v, upper);
    change = 0.0;
    for (std::size_t i = 0; i < v_next.values.size(); ++i)
      change = std::max(change, std::abs(v_next.values[i] - res.v.values[i]));
    res.v = std::move(v_next);
    record("v-minimization");
    if (change <= params_.altmin_tol) break;
  }
  if (change > params_.altmin_tol) {
    std::ostringstream msg;
    msg << "alternate minimization hit " << params_.altmin_max_iters << " iterations; last v change " << change
        << " (oscillating)";
    throw Error(ErrorCode::NoConvergence, msg.str());
  }
  if (!params_.freeze_v) res.kkt = v_kkt(res.u, res.v, upper);
  return res;
}

double QuasiStaticSolver::load_power(const Field& u, const Field& v, const LoadProgram& load, double s) const {
  require_mesh(u);
  require_mesh(v);
  Vector gs(mass_.size());
  for (Index i = 0; i < mesh_->num_nodes(); ++i) gs[i] = load.g_s(mesh_->node(i), s);
  double p = 0.0;
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const auto& tri = mesh_->triangles()[t];
    Vec2 du{}, dg{};
    double w = 0.0;
    for (int k = 0; k < 3; ++k) {
      const auto n = static_cast<std::size_t>(tri[k]);
      du = du + u.values[n] * elements_[t].grad[k];
      dg = dg + gs[n] * elements_[t].grad[k];
      w += v.values[n] * v.values[n];
    }
    p += elements_[t].area * (w / 3.0 + params_.eta) * dot(params_.tensor * du, dg);
  }
  return p;
}

Trajectory QuasiStaticSolver::evolve(const LoadProgram& load, const Field& v_init, const StepObserver& observer) const {
  require_mesh(v_init);
  for (double x : v_init.values)
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidArgument, "initial damage field outside [0, 1]");

  const auto run_step = [&](int k, const Field& u, const Field& v, double s) {
    try {
      return alternate_minimize(u, v, v, load, s);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "step " << k << " (s = " << s << "): " << e.what();
      throw Error(e.code(), msg.str());
    }
  };

  Trajectory traj;
  const int n = params_.steps;
  const double ds = 1.0 / n;
  AltMinResult cur = run_step(0, Field::constant(mesh_, 0.0), v_init, 0.0);
  double e0 = energy_E(cur.u, cur.v), h0 = energy_H(cur.v);
  const double total0 = e0 + h0;
  double power = load_power(cur.u, cur.v, load, 0.0);
  double work = 0.0;

  const auto push = [&](int k, double s, const AltMinResult& r, double e, double h, double v_increase) {
    StepRecord rec;
    rec.step = k;
    rec.s = s;
    rec.E = e;
    rec.H = h;
    rec.total = e + h;
    rec.work_accum = work;
    rec.balance_residual = rec.total - total0 - work;
    rec.altmin_iters = r.iterations;
    rec.min_v = *std::min_element(r.v.values.begin(), r.v.values.end());
    rec.max_v_increase = v_increase;
    rec.max_energy_increase = r.max_energy_increase;
    rec.kkt = r.kkt;
    traj.records.push_back(rec);
    traj.monotonicity_certificate = std::max(traj.monotonicity_certificate, v_increase);
    if (observer) observer(rec, r.u, r.v);
  };
  push(0, 0.0, cur, e0, h0, -std::numeric_limits<double>::infinity());
  traj.monotonicity_certificate = -std::numeric_limits<double>::infinity();

  for (int k = 1; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    AltMinResult next = run_step(k, cur.u, cur.v, s);
    double v_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < next.v.values.size(); ++i)
      v_increase = std::max(v_increase, next.v.values[i] - cur.v.values[i]);
    const double next_power = load_power(next.u, next.v, load, s);
    work += 0.5 * ds * (power + next_power);
    power = next_power;
    e0 = energy_E(next.u, next.v);
    h0 = energy_H(next.v);
    cur = std::move(next);
    push(k, s, cur, e0, h0, v_increase);
  }

  const StepRecord& last = traj.records.back();
  traj.final_state = {last.s, cur.u, cur.v, last.E, last.H, last.work_accum, last.balance_residual};
  return traj;
}

double energy_E0(const Field& u, const Field& v, const ModelParams& params) {
  require_same_mesh(u, v);
  return elastic_energy(u, v, params.eta, params.tensor);
}

double energy_H0(const Field& v, const ModelParams& params) {
  return surface_energy(v, params.gamma, params.tensor);
}

Field minimize_u(const Field& v, const LoadProgram& load, double s, const ModelParams& params) {
  return QuasiStaticSolver(v.mesh, params).minimize_u(v, load, s);
}

Field minimize_v(const Field& u, const Field& v_prev, const ModelParams& params) {
  require_same_mesh(u, v_prev);
  return QuasiStaticSolver(u.mesh, params).minimize_v(u, v_prev, v_prev);
}

AltMinResult alternate_minimize(const FractureState& state, const Field& upper, const LoadProgram& load,
                                const ModelParams& params) {
  return QuasiStaticSolver(state.v.mesh, params).alternate_minimize(state.u, state.v, upper, load, state.s);
}

Trajectory evolve(const LoadProgram& load, const ModelParams& params, const Field& v_init,
                  const StepObserver& observer) {
  return QuasiStaticSolver(v_init.mesh, params).evolve(load, v_init, observer);
}

Field notched_damage(std::shared_ptr<const Mesh> mesh, Vec2 a, Vec2 b) {
  const double reach = 0.5 * mesh->max_edge_length();
  Field v = Field::constant(mesh, 1.0);
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  for (Index i = 0; i < mesh->num_nodes(); ++i) {
    const Vec2 p = mesh->node(i);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
    if (norm(p - (a + t * d)) <= reach) v.values[i] = 0.0;
  }
  return v;
}

}  // namespace perfrac
