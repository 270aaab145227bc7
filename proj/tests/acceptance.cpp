// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "perfrac/cell_homog.hpp"
#include "perfrac/error.hpp"
#include "perfrac/finescale.hpp"
#include "perfrac/mms.hpp"

using namespace perfrac;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

std::shared_ptr<const Mesh> cell_mesh(double r, int n) {
  return std::make_shared<const Mesh>(build_unit_cell_mesh({r, n}));
}

std::shared_ptr<const Mesh> unit_macro(int n) {
  return std::make_shared<const Mesh>(build_macro_mesh({0, 1, 0, 1, n}));
}

// Worst relative half-step energy increase over every evolution run here.
double g_worst_increase = -std::numeric_limits<double>::infinity();
int g_runs = 0;

void note_run(const Trajectory& t) {
  ++g_runs;
  for (const auto& r : t.records) g_worst_increase = std::max(g_worst_increase, r.max_energy_increase);
}

Outcome matrix_identity() {
  double worst = 0.0;
  for (double r : {0.05, 0.15, 0.25, 0.35})
    worst = std::max(worst, homogenized_tensor(solve_cell_problems(cell_mesh(r, 64))).identity_residual);
  return {worst <= 1e-7, "max identity residual over r in {0.05,0.15,0.25,0.35}, n=64: " + sci(worst) + " (<= 1e-7)"};
}

Outcome no_hole() {
  const CorrectorBasis b = solve_cell_problems(cell_mesh(0.0, 64));
  double z = 0.0;
  for (const auto& f : b.z)
    for (double x : f.values) z = std::max(z, std::abs(x));
  const double dm = homogenized_tensor(b).m0.max_abs_diff(Mat2::identity());
  return {z <= 1e-9 && dm <= 1e-9, "r=0: max|z_i| " + sci(z) + ", max|M0 - I| " + sci(dm) + " (both <= 1e-9)"};
}

Outcome dilute_limit() {
  const auto dilute = [](double r) { return 1.0 / (1.0 + std::numbers::pi * r * r); };
  const Mat2 small = homogenized_tensor(solve_cell_problems(cell_mesh(0.05, 64))).m0;
  const Mat2 mid = homogenized_tensor(solve_cell_problems(cell_mesh(0.25, 64))).m0;
  const double e_small = std::abs(small.a11 - dilute(0.05)) / dilute(0.05);
  const double e_mid = std::abs(mid.a11 - dilute(0.25)) / dilute(0.25);
  const double off = std::max(std::abs(small.a12), std::abs(mid.a12));
  const double aniso = std::max(std::abs(small.a11 - small.a22), std::abs(mid.a11 - mid.a22));
  std::ostringstream d;
  d << "m(0.05)=" << small.a11 << " rel.dev " << sci(e_small) << " (<= 1e-2); m(0.25)=" << mid.a11 << " rel.dev "
    << sci(e_mid) << " (<= 3e-2); off-diag " << sci(off) << ", diag asym " << sci(aniso) << " (<= 1e-4)";
  return {e_small <= 0.01 && e_mid <= 0.03 && off <= 1e-4 && aniso <= 1e-4, d.str()};
}

Outcome fem_mms() {
  const auto levels = mms_study({16, 32});
  const double ratio = levels[0].l2_error / levels[1].l2_error;
  return {ratio >= 3.5 && ratio <= 4.5, "L2 error n=16 " + sci(levels[0].l2_error) + ", n=32 " +
                                            sci(levels[1].l2_error) + ", ratio " + std::to_string(ratio) +
                                            " (in [3.5, 4.5])"};
}

// Notched homogenized run to failure, shared by criteria 5 and 8.
struct FailureRun {
  double worst_increase = -std::numeric_limits<double>::infinity();
  double min_v = std::numeric_limits<double>::infinity();
  double max_v = -std::numeric_limits<double>::infinity();
  double worst_kkt = 0.0;
  double final_min_v = 1.0;
  double peak_E = 0.0, final_E = 0.0;
  int steps = 0;
};

const FailureRun& failure_run() {
  static const FailureRun run = [] {
    FailureRun out;
    ModelParams p;
    p.steps = 50;
    p.tensor = homogenized_tensor(solve_cell_problems(cell_mesh(0.25, 32))).m0;
    auto mesh = unit_macro(48);
    const Field v0 = notched_damage(mesh, {0.5, 0.0}, {0.5, 0.25});
    Vector prev = v0.values;
    const auto t = QuasiStaticSolver(mesh, p).evolve(
        LoadProgram::uniaxial(4.0), v0, [&](const StepRecord& r, const Field&, const Field& v) {
          for (std::size_t i = 0; i < v.values.size(); ++i) {
            out.min_v = std::min(out.min_v, v.values[i]);
            out.max_v = std::max(out.max_v, v.values[i]);
            if (r.step > 0) out.worst_increase = std::max(out.worst_increase, v.values[i] - prev[i]);
          }
          prev = v.values;
          out.worst_kkt = std::max(out.worst_kkt, r.kkt.worst());
          out.peak_E = std::max(out.peak_E, r.E);
          out.steps = r.step;
        });
    note_run(t);
    out.final_min_v = t.records.back().min_v;
    out.final_E = t.records.back().E;
    return out;
  }();
  return run;
}

Outcome irreversibility() {
  const FailureRun& r = failure_run();
  const bool broke = r.final_min_v <= 0.05 && r.final_E < 0.5 * r.peak_E;
  std::ostringstream d;
  d << "N=" << r.steps << " notched run, v in [" << r.min_v << ", " << r.max_v << "], max(v_k - v_{k-1}) "
    << sci(r.worst_increase) << " (<= 1e-12); failure reached: " << (broke ? "yes" : "no") << " (final min v "
    << r.final_min_v << ", E " << sci(r.final_E) << " vs peak " << sci(r.peak_E) << ")";
  return {r.min_v >= 0.0 && r.max_v <= 1.0 && r.worst_increase <= 1e-12 && broke, d.str()};
}

Outcome monotonicity() {
  return {g_worst_increase <= 1e-12, "worst relative half-step energy increase over " + std::to_string(g_runs) +
                                         " evolutions: " + sci(g_worst_increase) + " (<= 1e-12)"};
}

Outcome energy_balance() {
  // (a) frozen v = 1: analytic energy against initial energy + accumulated work.
  const double m = homogenized_tensor(solve_cell_problems(cell_mesh(0.25, 32))).m0.a11;
  auto mesh = unit_macro(16);
  const auto frozen_error = [&](int steps) {
    ModelParams p;
    p.steps = steps;
    p.freeze_v = true;
    p.tensor = Mat2::scalar(m);
    const auto t = evolve(LoadProgram::uniaxial(), p, Field::constant(mesh, 1.0));
    note_run(t);
    double worst = 0.0;
    const double e_init = t.records.front().total;
    for (const auto& r : t.records) {
      if (r.s == 0.0) continue;
      const double exact = (1 + p.eta) * m * r.s * r.s / 2 * mesh->total_area();
      worst = std::max({worst, std::abs(e_init + r.work_accum - exact) / exact, std::abs(r.E - exact) / exact});
    }
    return worst;
  };
  const double e50 = frozen_error(50), e200 = frozen_error(200);
  // The trapezoid rule integrates the frozen-v work exactly, so both errors sit
  // at roundoff; the refinement factor is only meaningful above that floor.
  constexpr double floor = 1e-12;
  const bool factor_ok = (e50 <= floor && e200 <= floor) || e50 / e200 >= 3.5;

  // (b) free v in the elastic regime: the balance residual itself under refinement.
  const auto free_residual = [&](int steps) {
    ModelParams p;
    p.steps = steps;
    p.tensor = Mat2::scalar(m);
    p.altmin_tol = 1e-10;
    p.kkt_tol = 1e-10;
    p.solver_tol = 1e-12;
    const auto t = evolve(LoadProgram::uniaxial(0.5), p, Field::constant(mesh, 1.0));
    note_run(t);
    double worst = 0.0;
    for (const auto& r : t.records) worst = std::max(worst, std::abs(r.balance_residual) / std::max(r.total, 1e-300));
    return worst;
  };
  const double f50 = free_residual(50), f200 = free_residual(200);
  std::ostringstream d;
  d << "v frozen at 1, m=" << m << ": rel. balance error N=50 " << sci(e50) << " (<= 1e-3), N=200 " << sci(e200)
    << " (<= 2.5e-4), factor " << (e50 <= floor && e200 <= floor ? "n/a, both at roundoff floor" : sci(e50 / e200))
    << "; v free: rel. residual N=50 " << sci(f50) << ", N=200 " << sci(f200) << ", factor " << sci(f50 / f200)
    << " (>= 3.5)";
  return {e50 <= 1e-3 && e200 <= 2.5e-4 && factor_ok && f50 / f200 >= 3.5, d.str()};
}

Outcome kkt_certificate() {
  const FailureRun& r = failure_run();
  return {r.worst_kkt <= 1e-6, "worst v-subproblem KKT residual (interior and bound sign) over " +
                                   std::to_string(r.steps + 1) + " steps: " + sci(r.worst_kkt) + " (<= 1e-6)"};
}

Outcome homogenization() {
  SweepSetup s;
  s.domain = {0, 1, 0, 1, 32};
  s.cell = {0.25, 16};
  s.epsilons = {0.25, 0.125, 0.0625};
  s.params.steps = 4;
  const SweepResult r = homogenization_sweep(s, LoadProgram::uniaxial(0.5));
  note_run(r.homog);
  for (const auto& t : r.fine) note_run(t);
  bool ok = true;
  std::ostringstream d;
  for (std::size_t k = 0; k < r.errors.size(); ++k) {
    const ErrorReport& e = r.errors[k];
    if (k > 0 && !(e.relL2_u < r.errors[k - 1].relL2_u)) ok = false;
    if (!(e.relH1semi_u_corrected <= e.relH1semi_u)) ok = false;
    d << (k ? "; " : "") << "eps=" << e.epsilon << " relL2_u " << sci(e.relL2_u) << ", H1 " << sci(e.relH1semi_u)
      << " -> corrected " << sci(e.relH1semi_u_corrected);
  }
  return {ok, d.str()};
}

Outcome coincidence() {
  const double eps = 0.25;
  const int cell_n = 16;
  auto fine = perforated_domain({0, 1, 0, 1, 64}, eps, {0.0, cell_n});
  auto macro = unit_macro(64);
  ModelParams p;
  p.steps = 25;
  p.tensor = homogenized_tensor(solve_cell_problems(cell_mesh(0.0, cell_n))).m0;
  const auto load = LoadProgram::uniaxial(4.0);
  const auto th = evolve(load, p, notched_damage(macro, {0.5, 0.0}, {0.5, 0.25}));
  const auto tf = fine_evolve(load, p, fine, notched_damage(fine, {0.5, 0.0}, {0.5, 0.25}));
  note_run(th);
  note_run(tf);
  double worst = 0.0;
  for (std::size_t k = 0; k < th.records.size(); ++k) {
    const auto& a = th.records[k];
    const auto& b = tf.records[k];
    for (auto [x, y] : {std::pair{a.E, b.E}, std::pair{a.H, b.H}, std::pair{a.total, b.total}})
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-300}));
  }
  const bool same_shape = th.records.size() == tf.records.size() && fine->num_nodes() == macro->num_nodes();
  return {same_shape && worst <= 1e-8, "r=0, " + std::to_string(th.records.size()) +
                                           " steps on matching 65x65 meshes: worst relative energy difference " +
                                           sci(worst) + " (<= 1e-8)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  // Criterion 6 aggregates the evolutions of the others, so it runs last.
  const std::vector<Criterion> criteria = {
      {1, "matrix identity", matrix_identity},
      {2, "no-hole degeneracy", no_hole},
      {3, "dilute-limit oracle", dilute_limit},
      {4, "FEM manufactured solution", fem_mms},
      {5, "irreversibility and bounds", irreversibility},
      {7, "energy balance", energy_balance},
      {8, "KKT certificate", kkt_certificate},
      {9, "homogenization validation", homogenization},
      {10, "model coincidence at r = 0", coincidence},
      {6, "alternate-minimization monotonicity", monotonicity},
  };
  std::vector<std::pair<int, std::string>> lines;
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    char head[96];
    std::snprintf(head, sizeof head, "criterion %2d %s  %s (%.1fs): ", c.id, o.pass ? "PASS" : "FAIL", c.name, secs);
    lines.emplace_back(c.id, head + o.detail);
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
