#include "febe/snapshot.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "febe/quadrature.hpp"

namespace febe {

namespace {

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out) throw Error("write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move '" + tmp + "' to '" + path + "'");
}

void put(std::ostringstream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

SnapshotData sample_surface(const PatchSet& ps, const Coeffs& theta,
                            const Coeffs& traction, int density) {
  if (density < 1) throw Error("sampling density must be at least 1");
  const QuadMesh& m = ps.mesh();
  const int s = density;

  // global sample keys: (0, vertex, 0, 0), (1, edge, pos, 0), (2, face, gi, gj)
  std::map<std::tuple<int, int, int, int>, int> index;
  std::vector<Vec3> pos, trac;
  std::vector<std::array<int, 4>> cells;

  BasisValues b;
  auto sample_id = [&](int f, int gi, int gj) {
    std::tuple<int, int, int, int> key;
    bool iedge = gi == 0 || gi == s, jedge = gj == 0 || gj == s;
    if (iedge && jedge) {
      int c = gi == 0 ? (gj == 0 ? 0 : 3) : (gj == 0 ? 1 : 2);
      key = {0, m.corner(f, c), 0, 0};
    } else if (iedge || jedge) {
      int slot, t;  // local edge and position along its direction
      if (gj == 0) {
        slot = 0;
        t = gi;
      } else if (gi == s) {
        slot = 1;
        t = gj;
      } else if (gj == s) {
        slot = 2;
        t = s - gi;
      } else {
        slot = 3;
        t = s - gj;
      }
      int e = m.edge_between(m.corner(f, slot), m.corner(f, slot + 1));
      int p = m.edges()[(size_t)e].v0 == m.corner(f, slot) ? t : s - t;
      key = {1, e, p, 0};
    } else {
      key = {2, f, gi, gj};
    }
    auto it = index.find(key);
    if (it != index.end()) return it->second;

    const SubdivisionPatch& p = ps.patch(f);
    double a = (double)gi / s, bb = (double)gj / s;
    double u, v;
    square_corner_param((4 - p.rot) & 3, a, bb, u, v);
    ps.basis(p, u, v, 0, b);
    Vec3 x = Vec3::Zero(), t = Vec3::Zero();
    for (int q = 0; q < (int)p.stencil.size(); ++q) {
      x += b.w(0, q) * theta.row(p.stencil[(size_t)q]).transpose();
      t += b.w(0, q) * traction.row(p.stencil[(size_t)q]).transpose();
    }
    int id = (int)pos.size();
    pos.push_back(x);
    trac.push_back(t);
    index.emplace(key, id);
    return id;
  };

  for (int f = 0; f < m.num_quads(); ++f) {
    for (int gj = 0; gj < s; ++gj)
      for (int gi = 0; gi < s; ++gi) {
        int i00 = sample_id(f, gi, gj);
        int i10 = sample_id(f, gi + 1, gj);
        int i11 = sample_id(f, gi + 1, gj + 1);
        int i01 = sample_id(f, gi, gj + 1);
        cells.push_back({i00, i10, i11, i01});
      }
  }

  SnapshotData snap;
  snap.points.resize((int)pos.size(), 3);
  snap.traction.resize((int)pos.size(), 3);
  snap.traction_z.resize((int)pos.size());
  for (int i = 0; i < (int)pos.size(); ++i) {
    snap.points.row(i) = pos[(size_t)i].transpose();
    snap.traction.row(i) = trac[(size_t)i].transpose();
    snap.traction_z(i) = trac[(size_t)i].z();
  }
  snap.cells.resize((int)cells.size(), 4);
  for (int i = 0; i < (int)cells.size(); ++i)
    for (int k = 0; k < 4; ++k) snap.cells(i, k) = cells[(size_t)i][(size_t)k];
  return snap;
}

void write_snapshot(const SnapshotData& snap, const std::string& path) {
  std::ostringstream out;
  const int n = (int)snap.points.rows();
  const int mcells = (int)snap.cells.rows();
  out << "# vtk DataFile Version 3.0\n";
  out << "deformable surface snapshot\n";
  out << "ASCII\n";
  out << "DATASET POLYDATA\n";
  out << "POINTS " << n << " double\n";
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (k) out << ' ';
      put(out, snap.points(i, k));
    }
    out << '\n';
  }
  out << "POLYGONS " << mcells << ' ' << 5 * mcells << '\n';
  for (int i = 0; i < mcells; ++i)
    out << "4 " << snap.cells(i, 0) << ' ' << snap.cells(i, 1) << ' '
        << snap.cells(i, 2) << ' ' << snap.cells(i, 3) << '\n';
  out << "POINT_DATA " << n << '\n';
  out << "VECTORS traction double\n";
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (k) out << ' ';
      put(out, snap.traction(i, k));
    }
    out << '\n';
  }
  out << "SCALARS traction_z double 1\n";
  out << "LOOKUP_TABLE default\n";
  for (int i = 0; i < n; ++i) {
    put(out, snap.traction_z(i));
    out << '\n';
  }
  out << "FIELD solver_state 4\n";
  auto field = [&](const char* name, double v) {
    out << name << " 1 1 double\n";
    put(out, v);
    out << '\n';
  };
  field("time", snap.time);
  field("p0", snap.p0);
  field("zeta", snap.zeta);
  field("volume_ratio", snap.volume_ratio);
  atomic_write(path, out.str());
}

SnapshotData read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("# vtk DataFile", 0) != 0) throw Error("not a polydata file: " + path);
  std::getline(in, line);  // title
  std::getline(in, line);
  if (line != "ASCII") throw Error("expected ASCII polydata");
  std::getline(in, line);
  if (line != "DATASET POLYDATA") throw Error("expected DATASET POLYDATA");

  auto expect = [&](const std::string& tag) {
    std::string tok;
    in >> tok;
    if (tok != tag) throw Error("expected '" + tag + "', got '" + tok + "'");
  };

  SnapshotData snap;
  int n = 0, mcells = 0, total = 0;
  std::string tok;
  expect("POINTS");
  in >> n >> tok;
  snap.points.resize(n, 3);
  for (int i = 0; i < n; ++i)
    in >> snap.points(i, 0) >> snap.points(i, 1) >> snap.points(i, 2);
  expect("POLYGONS");
  in >> mcells >> total;
  if (total != 5 * mcells) throw Error("unexpected polygon index count");
  snap.cells.resize(mcells, 4);
  for (int i = 0; i < mcells; ++i) {
    int deg;
    in >> deg;
    if (deg != 4) throw Error("non-quad polygon in snapshot");
    in >> snap.cells(i, 0) >> snap.cells(i, 1) >> snap.cells(i, 2) >> snap.cells(i, 3);
  }
  expect("POINT_DATA");
  int np;
  in >> np;
  if (np != n) throw Error("point data count mismatch");
  expect("VECTORS");
  in >> tok >> tok;
  snap.traction.resize(n, 3);
  for (int i = 0; i < n; ++i)
    in >> snap.traction(i, 0) >> snap.traction(i, 1) >> snap.traction(i, 2);
  expect("SCALARS");
  in >> tok >> tok >> tok;
  expect("LOOKUP_TABLE");
  in >> tok;
  snap.traction_z.resize(n);
  for (int i = 0; i < n; ++i) in >> snap.traction_z(i);
  expect("FIELD");
  int nfields;
  in >> tok >> nfields;
  for (int k = 0; k < nfields; ++k) {
    std::string name;
    int comp, count;
    in >> name >> comp >> count >> tok;
    double v;
    in >> v;
    if (comp != 1 || count != 1) throw Error("unexpected field layout: " + name);
    if (name == "time")
      snap.time = v;
    else if (name == "p0")
      snap.p0 = v;
    else if (name == "zeta")
      snap.zeta = v;
    else if (name == "volume_ratio")
      snap.volume_ratio = v;
    else
      throw Error("unknown field: " + name);
  }
  if (!in) throw Error("truncated snapshot: " + path);
  return snap;
}

void write_history(const std::vector<StepRecord>& rows, const std::string& path) {
  std::ostringstream out;
  out << "t,volume,p0,min_gap,subiters,newton_total,quad_nonconv\n";
  for (const StepRecord& r : rows) {
    put(out, r.t);
    out << ',';
    put(out, r.volume);
    out << ',';
    put(out, r.p0);
    out << ',';
    put(out, r.min_gap);
    out << ',' << r.subiters << ',' << r.newton_total << ',' << r.quad_nonconv
        << '\n';
  }
  atomic_write(path, out.str());
}

void write_newton_log(const std::vector<NewtonRecord>& rows,
                      const std::string& path) {
  std::ostringstream out;
  out << "step,subiter,iterations,residual,p0\n";
  for (const NewtonRecord& r : rows) {
    out << r.step << ',' << r.subiter << ',' << r.iterations << ',';
    put(out, r.residual);
    out << ',';
    put(out, r.p0);
    out << '\n';
  }
  atomic_write(path, out.str());
}

namespace {

std::pair<int, int> observed_range(const QuadratureStats& stats) {
  int lo = -1, hi = -1;
  for (int q = 0; q < (int)stats.accepted.size(); ++q)
    if (stats.accepted[(size_t)q] > 0) {
      if (lo < 0) lo = q;
      hi = q;
    }
  return {lo, hi};
}

}  // namespace

void write_histogram(const QuadratureStats& stats, const std::string& path) {
  std::ostringstream out;
  out << "q count\n";
  auto [lo, hi] = observed_range(stats);
  if (lo >= 0)
    for (int q = lo; q <= hi; ++q)
      out << q << ' ' << stats.accepted[(size_t)q] << '\n';
  atomic_write(path, out.str());
}

void write_levels(const QuadratureStats& stats, const std::string& path) {
  std::ostringstream out;
  out << "q l\n";
  auto [lo, hi] = observed_range(stats);
  if (lo >= 0)
    for (int q = lo; q <= hi; ++q) out << q << ' ' << required_levels(q, 4) << '\n';
  atomic_write(path, out.str());
}

}  // namespace febe
