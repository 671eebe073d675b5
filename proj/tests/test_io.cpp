#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <doctest.h>

#include "febe/config.hpp"
#include "febe/scenario.hpp"
#include "febe/snapshot.hpp"

using namespace febe;

namespace {

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config defaults are the reference parameter set") {
  RunConfig cfg;
  CHECK(cfg.scenario == "balloon");
  CHECK(cfg.mesh_path.empty());
  CHECK(cfg.poisson_ratio == 0.0);
  CHECK(cfg.bending_scale == 5.77e-4);
  CHECK(cfg.coupling_strength == 1e-5);
  CHECK(cfg.viscosity_ratio == 1.0);
  CHECK(cfg.time_step == 4.0);
  CHECK(cfg.steps == 20);
  CHECK(cfg.tolerance == 1e-6);
  CHECK(cfg.quad_tol == 1e-7);
  CHECK(cfg.quad_min_order == 2);
  CHECK(cfg.quad_max_order == 36);
  CHECK(cfg.perturb_amplitude == 0.01);
  CHECK(cfg.perturb_seed == 1);
  CHECK(cfg.inflow_magnitude == 1.0);
  CHECK(cfg.output_dir == "out");
  CHECK(cfg.snapshot_cadence == 5);
  CHECK(cfg.max_subiterations == 20);
  CHECK(cfg.max_newton == 30);
  CHECK(cfg.gap == 0.05);
  CHECK(cfg.refine == 1);

  CHECK(parse_config_text("") == RunConfig{});
}

TEST_CASE("config parsing") {
  RunConfig cfg = parse_config_text(
      "# run setup\n"
      "scenario = sphere_drag   # trailing comment\n"
      "\n"
      "  refine=3\n"
      "viscosity_ratio = inf\n"
      "perturb_seed = 42\n");
  CHECK(cfg.scenario == "sphere_drag");
  CHECK(cfg.refine == 3);
  CHECK(std::isinf(cfg.viscosity_ratio));
  CHECK(cfg.viscosity_ratio > 0);
  CHECK(cfg.perturb_seed == 42);
  CHECK(cfg.steps == 20);  // untouched keys keep their defaults

  SUBCASE("duration replaces steps") {
    RunConfig d = parse_config_text("duration = 80\ntime_step = 4\n");
    CHECK(d.steps == 20);
    RunConfig h = parse_config_text("duration = 6\ntime_step = 4\n");
    CHECK(h.steps == 2);  // rounded to the nearest whole step
    CHECK_THROWS_WITH_AS(parse_config_text("steps = 5\nduration = 80\n"),
                         doctest::Contains("either steps or duration"), Error);
  }

  SUBCASE("malformed input") {
    CHECK_THROWS_WITH_AS(parse_config_text("viscocity = 2\n"),
                         doctest::Contains("unknown key 'viscocity'"), Error);
    CHECK_THROWS_WITH_AS(parse_config_text("steps = 5\nsteps = 6\n"),
                         doctest::Contains("duplicate key 'steps'"), Error);
    CHECK_THROWS_WITH_AS(parse_config_text("steps\n"),
                         doctest::Contains("expected 'key = value'"), Error);
    CHECK_THROWS_WITH_AS(parse_config_text("gap = wide\n"),
                         doctest::Contains("not a number"), Error);
    CHECK_THROWS_WITH_AS(parse_config_text("steps = 2.5\n"),
                         doctest::Contains("not an integer"), Error);
  }

  SUBCASE("range checks") {
    CHECK_THROWS_WITH_AS(parse_config_text("time_step = -1\n"),
                         doctest::Contains("time_step must be positive"), Error);
    CHECK_THROWS_AS(parse_config_text("poisson_ratio = 0.6\n"), Error);
    CHECK_THROWS_AS(parse_config_text("refine = 7\n"), Error);
    CHECK_THROWS_AS(parse_config_text("quad_min_order = 0\n"), Error);
    CHECK_THROWS_AS(parse_config_text("quad_max_order = 1\n"), Error);
    CHECK_THROWS_AS(parse_config_text("snapshot_cadence = 0\n"), Error);
    CHECK_THROWS_AS(parse_config_text("max_subiterations = 0\n"), Error);
    CHECK_THROWS_AS(parse_config_text("output_dir =\n"), Error);
    CHECK_THROWS_WITH_AS(parse_config_text("scenario = swimmer\n"),
                         doctest::Contains("unknown scenario 'swimmer'"), Error);
    // a mesh file overrides the named scenario, so any label is accepted
    RunConfig withmesh = parse_config_text("scenario = swimmer\nmesh = m.mesh\n");
    CHECK(withmesh.mesh_path == "m.mesh");
  }
}

TEST_CASE("config serialization round trip") {
  std::string text = serialize_config(RunConfig{});
  CHECK(text.find("scenario = balloon\n") != std::string::npos);
  CHECK(text.find("steps = 20\n") != std::string::npos);
  CHECK(parse_config_text(text) == RunConfig{});

  RunConfig cfg;
  cfg.scenario = "two_plates";
  cfg.gap = 0.1 + 0.2;  // not representable in short decimal
  cfg.bending_scale = 1.234567890123456e-5;
  cfg.viscosity_ratio = std::numeric_limits<double>::infinity();
  cfg.mesh_path = "meshes/shell.mesh";
  cfg.steps = 7;
  cfg.perturb_seed = 9876543210ull;
  RunConfig back = parse_config_text(serialize_config(cfg));
  CHECK(back == cfg);

  std::string path = tmp_path("febe_io_config.cfg");
  {
    std::ofstream out(path);
    out << serialize_config(cfg);
  }
  CHECK(parse_config(path) == cfg);
  std::remove(path.c_str());
  CHECK_THROWS_WITH_AS(parse_config(path), doctest::Contains("cannot open"),
                       Error);
}

TEST_CASE("surface sampling welds shared samples") {
  QuadMesh mesh = sphere_mesh(1);
  PatchSet ps = PatchSet::build(mesh);
  const QuadMesh& m = ps.mesh();
  const int V = m.num_vertices(), E = (int)m.edges().size(), F = m.num_quads();

  Coeffs zero(m.num_vertices(), 3);
  zero.setZero();

  for (int d : {1, 3}) {
    SnapshotData snap = sample_surface(ps, ps.reference(), zero, d);
    CHECK((int)snap.points.rows() == V + E * (d - 1) + F * (d - 1) * (d - 1));
    CHECK((int)snap.cells.rows() == F * d * d);
    CHECK(snap.cells.minCoeff() >= 0);
    CHECK(snap.cells.maxCoeff() < (int)snap.points.rows());
    CHECK(snap.traction.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(snap.traction_z.lpNorm<Eigen::Infinity>() == 0.0);
    for (int i = 0; i < snap.points.rows(); ++i)
      CHECK(std::fabs(snap.points.row(i).norm() - 1.0) < 0.05);
  }

  // traction samples follow the same limit interpolation as the geometry
  std::mt19937 rng(3u);
  std::normal_distribution<double> nd(0.0, 1.0);
  Coeffs trac(m.num_vertices(), 3);
  for (int a = 0; a < trac.rows(); ++a)
    for (int i = 0; i < 3; ++i) trac(a, i) = nd(rng);
  SnapshotData s2 = sample_surface(ps, ps.reference(), trac, 2);
  CHECK((s2.traction_z - s2.traction.col(2)).lpNorm<Eigen::Infinity>() == 0.0);
  SnapshotData s3 = sample_surface(ps, trac, ps.reference(), 2);
  CHECK((s3.points - s2.traction).lpNorm<Eigen::Infinity>() == 0.0);

  CHECK_THROWS_AS(sample_surface(ps, ps.reference(), zero, 0), Error);
}

TEST_CASE("snapshot files reproduce every array bitwise") {
  QuadMesh mesh = sphere_mesh(1);
  PatchSet ps = PatchSet::build(mesh);
  std::mt19937 rng(11u);
  std::normal_distribution<double> nd(0.0, 1.0);
  Coeffs trac(ps.mesh().num_vertices(), 3);
  for (int a = 0; a < trac.rows(); ++a)
    for (int i = 0; i < 3; ++i) trac(a, i) = nd(rng);

  SnapshotData snap = sample_surface(ps, ps.reference(), trac, 2);
  snap.time = 12.0;
  snap.p0 = -0.12345678901234567;
  snap.zeta = 1.0 / 3.0;
  snap.volume_ratio = 0.87654321;

  std::string path = tmp_path("febe_io_snapshot.vtk");
  write_snapshot(snap, path);
  SnapshotData back = read_snapshot(path);
  CHECK((back.points - snap.points).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.cells - snap.cells).lpNorm<Eigen::Infinity>() == 0);
  CHECK((back.traction - snap.traction).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.traction_z - snap.traction_z).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(back.time == snap.time);
  CHECK(back.p0 == snap.p0);
  CHECK(back.zeta == snap.zeta);
  CHECK(back.volume_ratio == snap.volume_ratio);

  std::string text = slurp(path);
  CHECK(text.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  CHECK(text.find("DATASET POLYDATA") != std::string::npos);
  CHECK(text.find("VECTORS traction double") != std::string::npos);
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(read_snapshot(path), doctest::Contains("cannot open"),
                       Error);
  {
    std::ofstream out(path);
    out << "hello\n";
  }
  CHECK_THROWS_WITH_AS(read_snapshot(path),
                       doctest::Contains("not a polydata file"), Error);
  std::remove(path.c_str());
}

TEST_CASE("run logs") {
  std::vector<StepRecord> rows(2);
  rows[0] = {4.0, 0.55501, -2.5e-3, 0.31, 2, 5, 0};
  rows[1] = {8.0, 0.1 + 0.2, -3.5e-3, 0.29, 3, 7, 1};
  std::string path = tmp_path("febe_io_history.csv");
  write_history(rows, path);
  std::string text = slurp(path);
  CHECK(text.rfind("t,volume,p0,min_gap,subiters,newton_total,quad_nonconv\n",
                   0) == 0);
  {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::getline(in, line);
    double t, vol, p0, gap;
    int sub, newt;
    long qn;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%d,%d,%ld", &t, &vol,
                        &p0, &gap, &sub, &newt, &qn) == 7);
    CHECK(vol == rows[1].volume);  // %.17g survives the round trip
    CHECK(sub == 3);
    CHECK(qn == 1);
    CHECK_FALSE(std::getline(in, line));
  }
  std::remove(path.c_str());

  std::vector<NewtonRecord> nl(1);
  nl[0] = {3, 2, 4, 9.5e-7, -1.25e-3};
  path = tmp_path("febe_io_newton.csv");
  write_newton_log(nl, path);
  text = slurp(path);
  CHECK(text.rfind("step,subiter,iterations,residual,p0\n", 0) == 0);
  CHECK(text.find("3,2,4,") != std::string::npos);
  std::remove(path.c_str());

  QuadratureStats stats;
  stats.record(3);
  stats.record(3);
  stats.record(5);
  path = tmp_path("febe_io_hist.dat");
  write_histogram(stats, path);
  text = slurp(path);
  CHECK(text == "q count\n3 2\n4 0\n5 1\n");
  path = tmp_path("febe_io_levels.dat");
  write_levels(stats, path);
  {
    std::istringstream in(slurp(path));
    std::string header;
    std::getline(in, header);
    CHECK(header == "q l");
    int q, l, rowcount = 0, prev = 0;
    while (in >> q >> l) {
      CHECK(q == 3 + rowcount);
      CHECK(l >= prev);
      prev = l;
      ++rowcount;
    }
    CHECK(rowcount == 3);
  }
  std::remove(tmp_path("febe_io_hist.dat").c_str());
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_history({}, "/nonexistent_dir_xyz/h.csv"), Error);
}
