#include "perfrac/run.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <ostream>
#include <sstream>

#include "perfrac/cell_homog.hpp"
#include "perfrac/error.hpp"
#include "perfrac/finescale.hpp"
#include "perfrac/mms.hpp"

namespace perfrac {

namespace fs = std::filesystem;

namespace {

class Outputs {
 public:
  Outputs(const std::string& dir, RunOutput& record) : dir_(dir), record_(record) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + dir + ": " + ec.message());
  }

  std::ofstream open(const std::string& name) {
    const fs::path path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    os.imbue(std::locale::classic());
    record_.files.push_back(path.string());
    return os;
  }

 private:
  fs::path dir_;
  RunOutput& record_;
};

class Csv {
 public:
  Csv(std::ofstream os, const std::vector<std::string>& header) : os_(std::move(os)) {
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }
  Csv& operator<<(double x) { return cell(format_csv(x)); }
  Csv& operator<<(int x) { return cell(std::to_string(x)); }
  void end() {
    os_ << '\n';
    first_ = true;
    os_.flush();
    if (!os_) throw Error(ErrorCode::IoError, "write failed");
  }

 private:
  Csv& cell(const std::string& s) {
    os_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  std::ofstream os_;
  bool first_ = true;
};

void write_fields(Outputs& out, const std::string& name, const Field& u, const Field& v, const std::string& title) {
  auto os = out.open(name);
  write_vtk(os, *u.mesh, {{"u", &u.values}, {"v", &v.values}}, title.c_str());
}

void warn_resolution(const Mesh& mesh, const ModelParams& p, std::ostream& log) {
  const double h = mesh.max_edge_length();
  if (h >= p.gamma / 4)
    log << "warning: mesh size " << h << " is not below gamma/4 = " << p.gamma / 4
        << "; the damage band is under-resolved\n";
}

Field initial_damage(const RunConfig& c, std::shared_ptr<const Mesh> mesh) {
  if (!c.notch) return Field::constant(mesh, 1.0);
  const auto& n = *c.notch;
  return notched_damage(std::move(mesh), {n[0], n[1]}, {n[2], n[3]});
}

void write_tensor(Outputs& out, const CellGeometry& cell, const HomogTensor& h) {
  Csv csv(out.open("m0.csv"), {"r", "n", "m11", "m12", "m21", "m22", "cell_volume", "identity_residual", "skew"});
  csv << cell.radius << cell.resolution << h.m0.a11 << h.m0.a12 << h.m0.a21 << h.m0.a22 << h.cell_volume
      << h.identity_residual << h.skew;
  csv.end();
}

void run_cell(const RunConfig& c, Outputs& out, std::ostream& log, bool quiet) {
  auto mesh = std::make_shared<const Mesh>(build_unit_cell_mesh(c.cell));
  const CorrectorBasis basis = solve_cell_problems(mesh);
  const HomogTensor h = homogenized_tensor(basis);
  write_tensor(out, c.cell, h);
  auto os = out.open("correctors.vtk");
  write_vtk(os, *mesh, {{"z1", &basis.z[0].values}, {"z2", &basis.z[1].values}}, "perfrac cell correctors");
  if (!quiet)
    log << "M0 = [" << h.m0.a11 << ", " << h.m0.a12 << "; " << h.m0.a21 << ", " << h.m0.a22
        << "], identity residual " << h.identity_residual << '\n';
}

void run_evolution(const RunConfig& c, Outputs& out, std::ostream& log, bool quiet, bool fine) {
  ModelParams p = c.model;
  std::shared_ptr<const Mesh> mesh;
  if (fine) {
    mesh = perforated_domain(c.domain, c.epsilon, c.cell);
    p = fine_params(p);
  } else {
    if (c.m0_scalar) {
      p.tensor = Mat2::scalar(*c.m0_scalar);
    } else {
      const HomogTensor h = homogenized_tensor(solve_cell_problems(std::make_shared<const Mesh>(build_unit_cell_mesh(c.cell))));
      write_tensor(out, c.cell, h);
      p.tensor = h.m0;
    }
    mesh = std::make_shared<const Mesh>(build_macro_mesh(c.domain));
  }
  warn_resolution(*mesh, p, log);

  const std::string e = fine ? "E" : "E0", hname = fine ? "H" : "H0";
  Csv csv(out.open("energy.csv"),
          {"step", "s", e, hname, "total", "work_accum", "balance_residual", "altmin_iters", "min_v"});
  const int last = p.steps;
  const auto observer = [&](const StepRecord& r, const Field& u, const Field& v) {
    csv << r.step << r.s << r.E << r.H << r.total << r.work_accum << r.balance_residual << r.altmin_iters << r.min_v;
    csv.end();
    if (c.vtk_stride > 0 && (r.step % c.vtk_stride == 0 || r.step == last)) {
      std::ostringstream name;
      name << "fields_" << std::setw(4) << std::setfill('0') << r.step << ".vtk";
      write_fields(out, name.str(), u, v, "perfrac step " + std::to_string(r.step));
    }
    if (!quiet)
      log << "step " << r.step << " s=" << r.s << " total=" << r.total << " min_v=" << r.min_v
          << " iters=" << r.altmin_iters << '\n';
  };
  QuasiStaticSolver(mesh, p).evolve(c.load(), initial_damage(c, mesh), observer);
}

void run_validate(const RunConfig& c, Outputs& out, std::ostream& log, bool quiet) {
  SweepSetup setup;
  setup.domain = c.domain;
  setup.cell = {c.cell.radius, c.validate_cell_n};
  setup.epsilons = c.validate_epsilons;
  setup.params = c.model;
  setup.params.steps = c.validate_steps;
  const SweepResult r = homogenization_sweep(setup, LoadProgram::uniaxial(c.validate_amplitude));
  Csv csv(out.open("errors.csv"),
          {"epsilon", "relL2_u", "relL2_u_corrected", "relH1semi_u", "relH1semi_u_corrected", "relL2_v"});
  for (const ErrorReport& e : r.errors) {
    csv << e.epsilon << e.relL2_u << e.relL2_u_corrected << e.relH1semi_u << e.relH1semi_u_corrected << e.relL2_v;
    csv.end();
    if (!quiet)
      log << "epsilon " << e.epsilon << ": relL2_u " << e.relL2_u << ", corrected H1 " << e.relH1semi_u_corrected
          << " vs " << e.relH1semi_u << '\n';
  }
}

void run_mms(const RunConfig& c, Outputs& out, std::ostream& log, bool quiet) {
  Csv csv(out.open("mms.csv"), {"n", "h", "l2_error", "l2_rate", "h1_error", "h1_rate"});
  for (const MmsLevel& l : mms_study(c.mms_levels)) {
    csv << l.n << l.h << l.l2_error << l.l2_rate << l.h1_error << l.h1_rate;
    csv.end();
    if (!quiet) log << "n=" << l.n << " L2 " << l.l2_error << " (rate " << l.l2_rate << ")\n";
  }
}

}  // namespace

RunOutput run(const RunConfig& config, std::ostream& log, bool quiet) {
  validate_config(config);
  RunOutput record;
  Outputs out(config.out_dir, record);
  {
    auto os = out.open("manifest.cfg");
    os << "# perfrac manifest: resolved configuration of this run\n" << serialize_config(config);
  }
  switch (config.mode) {
    case RunMode::Cell: run_cell(config, out, log, quiet); break;
    case RunMode::HomogRun: run_evolution(config, out, log, quiet, false); break;
    case RunMode::FineRun: run_evolution(config, out, log, quiet, true); break;
    case RunMode::Validate: run_validate(config, out, log, quiet); break;
    case RunMode::Mms: run_mms(config, out, log, quiet); break;
  }
  return record;
}

}  // namespace perfrac
