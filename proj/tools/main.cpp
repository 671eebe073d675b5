#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "febe/config.hpp"
#include "febe/fsi.hpp"
#include "febe/mesh.hpp"
#include "febe/quadrature.hpp"
#include "febe/scenario.hpp"
#include "febe/shell.hpp"
#include "febe/snapshot.hpp"
#include "febe/stokes.hpp"
#include "febe/subdivision.hpp"

namespace fs = std::filesystem;
using namespace febe;

namespace {

constexpr int kSnapshotDensity = 4;

struct Prepared {
  RunConfig cfg;
  Scenario scenario;
};

Prepared prepare(const std::string& config_path) {
  Prepared p;
  p.cfg = parse_config(config_path);
  if (const char* env = std::getenv("FEBE_OUTPUT_DIR"); env && *env)
    p.cfg.output_dir = env;
  p.scenario = build_scenario(p.cfg);
  return p;
}

CouplingSettings settings_from(const RunConfig& cfg) {
  CouplingSettings cs;
  cs.tau = cfg.time_step;
  cs.tol = cfg.tolerance;
  cs.lambda = cfg.viscosity_ratio;
  cs.varpi = cfg.coupling_strength;
  cs.max_subiterations = cfg.max_subiterations;
  cs.max_newton = cfg.max_newton;
  cs.shell.nu = cfg.poisson_ratio;
  cs.shell.thickness = cfg.bending_scale;
  cs.quad.q_min = cfg.quad_min_order;
  cs.quad.q_max = cfg.quad_max_order;
  cs.quad.tol = cfg.quad_tol;
  return cs;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void emit_snapshot(const PatchSet& ps, const FsiState& s, double volume0,
                   const VolumeFunctional& vol, const std::string& path) {
  SnapshotData snap = sample_surface(ps, s.theta, s.traction, kSnapshotDensity);
  snap.time = s.t;
  snap.p0 = s.p0;
  snap.zeta = s.zeta;
  snap.volume_ratio = vol.value(s.theta) / volume0;
  write_snapshot(snap, path);
}

int run_solve(const std::string& config_path) {
  Prepared p = prepare(config_path);
  PatchSet ps = PatchSet::build(p.scenario.mesh);
  CouplingSettings cs = settings_from(p.cfg);
  FsiDriver driver(ps, p.scenario.inflow, cs);
  FsiState s = driver.initial_state();

  fs::create_directories(p.cfg.output_dir);
  const VolumeFunctional& vol = driver.structural().volume_functional();
  char name[48];
  std::snprintf(name, sizeof name, "snapshot_%04d.vtk", 0);
  emit_snapshot(ps, s, driver.reference_volume(), vol, join(p.cfg.output_dir, name));

  std::printf("scenario %s: %d elements, %d control vertices, volume %.9g\n",
              p.scenario.name.c_str(), ps.mesh().num_quads(),
              ps.mesh().num_vertices(), driver.reference_volume());
  std::printf("emptying rate %.9g per unit time\n", driver.inflow().rate);

  auto flush_logs = [&]() {
    write_history(driver.history(), join(p.cfg.output_dir, "history.csv"));
    write_newton_log(driver.newton_log(), join(p.cfg.output_dir, "newton.csv"));
    write_histogram(driver.quadrature_stats(),
                    join(p.cfg.output_dir, "quadrature_histogram.txt"));
    write_levels(driver.quadrature_stats(),
                 join(p.cfg.output_dir, "quadrature_levels.txt"));
  };

  for (int step = 1; step <= p.cfg.steps; ++step) {
    try {
      driver.step(s);
    } catch (const Error& e) {
      std::fprintf(stderr, "step %d failed: %s\n", step, e.what());
      emit_snapshot(ps, s, driver.reference_volume(), vol,
                    join(p.cfg.output_dir, "failure_dump.vtk"));
      flush_logs();
      return 3;
    }
    const StepRecord& r = driver.history().back();
    std::printf(
        "step %3d  t %-8g volume %.9g  p0 %11.4e  min_gap %.5f  subiters %d  "
        "newton %d\n",
        step, r.t, r.volume, r.p0, r.min_gap, r.subiters, r.newton_total);
    std::fflush(stdout);
    if (step % p.cfg.snapshot_cadence == 0) {
      std::snprintf(name, sizeof name, "snapshot_%04d.vtk", step);
      emit_snapshot(ps, s, driver.reference_volume(), vol,
                    join(p.cfg.output_dir, name));
    }
  }
  flush_logs();
  std::printf("done: %d steps, volume ratio %.6f\n", p.cfg.steps,
              driver.history().empty()
                  ? 1.0
                  : driver.history().back().volume / driver.reference_volume());
  return 0;
}

int run_fluid_only(const std::string& config_path) {
  Prepared p = prepare(config_path);
  PatchSet ps = PatchSet::build(p.scenario.mesh);

  Coeffs g = p.scenario.fluid_velocity;
  if (g.rows() == 0) {
    g.resize(ps.mesh().num_vertices(), 3);
    g.setZero();
  } else if ((int)g.rows() != ps.mesh().num_vertices()) {
    throw Error("velocity data does not match the working mesh");
  }

  BoundaryOperators ops(ps);
  QuadratureStats stats;
  QuadratureParams qp{p.cfg.quad_min_order, p.cfg.quad_max_order, p.cfg.quad_tol};
  ops.assemble(ps.reference(), p.cfg.viscosity_ratio, qp, stats);
  BoundaryOperators::Solution sol = ops.solve(ops.velocity_rhs(g));

  Vec3 force = Vec3::Zero();
  double peak = 0;
  for (int v = 0; v < ps.mesh().num_vertices(); ++v) {
    force += ops.basis_measure()(v) * sol.traction.row(v).transpose();
    peak = std::max(peak, sol.traction.row(v).norm());
  }

  fs::create_directories(p.cfg.output_dir);
  SnapshotData snap = sample_surface(ps, ps.reference(), sol.traction,
                                     kSnapshotDensity);
  snap.zeta = sol.zeta;
  write_snapshot(snap, join(p.cfg.output_dir, "fluid_snapshot.vtk"));
  write_histogram(stats, join(p.cfg.output_dir, "quadrature_histogram.txt"));
  write_levels(stats, join(p.cfg.output_dir, "quadrature_levels.txt"));

  std::printf("scenario %s: %d elements\n", p.scenario.name.c_str(),
              ps.mesh().num_quads());
  std::printf("total traction force: % .9g % .9g % .9g  (|F| = %.9g)\n",
              force.x(), force.y(), force.z(), force.norm());
  std::printf("peak |traction|: %.9g\n", peak);
  std::printf("zeta: %.9g\n", sol.zeta);
  std::printf("min_gap: %.9g\n", min_gap(ps, ps.reference(), 3));
  std::printf("nonconverged pairs: %ld\n", stats.nonconverged);
  return 0;
}

int run_check() {
  int failures = 0;
  auto report = [&](const char* name, bool ok, double value) {
    std::printf("check %-34s %s (%.3g)\n", name, ok ? "ok" : "FAIL", value);
    if (!ok) ++failures;
  };

  {
    RunConfig cfg;
    cfg.perturb_amplitude = 0.02;
    Scenario sc = build_scenario(cfg);
    PatchSet ps = PatchSet::build(sc.mesh);
    double worst = 0;
    BasisValues b;
    for (int f = 0; f < ps.num_patches(); f += 7) {
      const SubdivisionPatch& patch = ps.patch(f);
      for (int k = 0; k < 40; ++k) {
        double u = uniform_hash01(11, (std::uint64_t)f, (std::uint64_t)(2 * k));
        double v = uniform_hash01(11, (std::uint64_t)f, (std::uint64_t)(2 * k + 1));
        ps.basis(patch, u, v, 0, b);
        worst = std::max(worst, std::fabs(b.w.row(0).sum() - 1.0));
      }
    }
    report("partition of unity", worst < 1e-12, worst);
  }
  {
    double worst = 0;
    for (PairCase pc : {PairCase::Identical, PairCase::CommonEdge,
                        PairCase::CommonVertex, PairCase::Disjoint}) {
      double sum = 0;
      for_each_pair_point(pc, 3, [&](const PairPoint& pt) { sum += pt.w; });
      worst = std::max(worst, std::fabs(sum - 1.0));
    }
    report("pair rule weight sums", worst < 1e-12, worst);
  }
  {
    QuadMesh mesh = sphere_mesh(1, 1.0);
    PatchSet ps = PatchSet::build(mesh);
    ShellEnergy energy(ps, ShellParams{});
    double w0 = energy.value(ps.reference());
    report("rest energy", std::fabs(w0) < 1e-14, w0);

    Eigen::MatrixXd mass = assemble_surface_mass(ps, ps.reference(), 4);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mass);
    double lmin = eig.eigenvalues().minCoeff();
    report("mass matrix positivity", lmin > 0, lmin);
  }
  {
    RunConfig cfg;
    cfg.scenario = "cube";
    Scenario sc = build_scenario(cfg);
    PatchSet coarse = PatchSet::build(sc.mesh);
    PatchSet fine = PatchSet::build(sc.mesh.subdivided());
    double vc = VolumeFunctional(coarse).value(coarse.reference());
    double vf = VolumeFunctional(fine).value(fine.reference());
    double diff = std::fabs(vc - vf);
    report("volume refinement invariance", vc > 0 && diff < 1e-3, diff);
  }
  {
    QuadMesh mesh = sphere_mesh(1, 1.0);
    PatchSet ps = PatchSet::build(mesh);
    BoundaryOperators ops(ps);
    QuadratureStats stats;
    ops.assemble(ps.reference(), std::numeric_limits<double>::infinity(),
                 QuadratureParams{}, stats);
    Coeffs g(ps.mesh().num_vertices(), 3);
    g.setZero();
    g.col(2).setOnes();
    BoundaryOperators::Solution sol = ops.solve(ops.velocity_rhs(g));
    double fz = 0;
    for (int v = 0; v < ps.mesh().num_vertices(); ++v)
      fz += ops.basis_measure()(v) * sol.traction(v, 2);
    double ref = 6.0 * std::numbers::pi;
    double rel = std::fabs(std::fabs(fz) - ref) / ref;
    report("coarse sphere drag", rel < 0.15, rel);
  }
  return failures == 0 ? 0 : 3;
}

int run_mesh_info(const std::string& mesh_path) {
  QuadMesh mesh = load_quad_mesh(mesh_path);
  int shell = 0, inflow = 0;
  for (int f = 0; f < mesh.num_quads(); ++f)
    (mesh.region(f) == Region::Shell ? shell : inflow)++;
  std::printf("vertices: %d\nedges: %d\nfaces: %d (shell %d, inflow %d)\n",
              mesh.num_vertices(), mesh.num_edges(), mesh.num_quads(), shell,
              inflow);
  std::printf("euler characteristic: %d\n", mesh.euler_characteristic());
  std::printf("region boundary length: %d\n", (int)mesh.boundary_curve().size());
  std::map<int, int> valences;
  for (int v = 0; v < mesh.num_vertices(); ++v) ++valences[mesh.valence(v)];
  std::printf("valences:");
  for (auto [val, count] : valences) std::printf(" %d:%d", val, count);
  std::printf("\n");
  int ev_shell = 0, ev_inflow = 0, ev_curve = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.valence(v) == 4) continue;
    if (mesh.on_boundary_curve(v))
      ++ev_curve;
    else if (mesh.touches_inflow(v))
      ++ev_inflow;
    else
      ++ev_shell;
  }
  std::printf("extraordinary vertices: shell %d, inflow %d, on boundary %d\n",
              ev_shell, ev_inflow, ev_curve);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coupled shell / boundary-integral flow solver"};
  app.require_subcommand(1);
  std::string config_path, mesh_path;
  CLI::App* solve = app.add_subcommand("solve", "run the coupled time stepper");
  solve->add_option("config", config_path, "key = value configuration file")
      ->required();
  CLI::App* fluid =
      app.add_subcommand("fluid-only", "single flow solve on a scenario");
  fluid->add_option("config", config_path, "key = value configuration file")
      ->required();
  app.add_subcommand("check", "run the built-in verification suite");
  CLI::App* info = app.add_subcommand("mesh-info", "report mesh statistics");
  info->add_option("mesh", mesh_path, "quad mesh file")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_solve(config_path);
    if (fluid->parsed()) return run_fluid_only(config_path);
    if (info->parsed()) return run_mesh_info(mesh_path);
    return run_check();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
