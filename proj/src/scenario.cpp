#include "febe/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>

#include "febe/quadrature.hpp"
#include "febe/shell.hpp"
#include "febe/stokes.hpp"

namespace febe {

namespace {

struct LatticeMap {
  std::map<std::tuple<int, int, int>, int> id;
  std::vector<Vec3>* verts;
  Vec3 origin, step;

  int get(int i, int j, int k) {
    auto key = std::make_tuple(i, j, k);
    auto it = id.find(key);
    if (it != id.end()) return it->second;
    int n = (int)verts->size();
    verts->push_back(origin + Vec3(i * step.x(), j * step.y(), k * step.z()));
    id.emplace(key, n);
    return n;
  }
};

}  // namespace

QuadMesh box_mesh(int nx, int ny, int nz, const Vec3& origin, const Vec3& size,
                  const std::function<Region(const Vec3&)>& classify) {
  if (nx < 1 || ny < 1 || nz < 1) throw Error("box_mesh: cell counts must be positive");
  std::vector<Vec3> verts;
  std::vector<std::array<int, 4>> quads;
  std::vector<Region> regions;
  LatticeMap lat{{}, &verts, origin,
                 Vec3(size.x() / nx, size.y() / ny, size.z() / nz)};

  auto emit = [&](int a, int b, int c, int d) {
    quads.push_back({a, b, c, d});
    Vec3 center = 0.25 * (verts[a] + verts[b] + verts[c] + verts[d]);
    regions.push_back(classify(center));
  };

  for (int j = 0; j < ny; ++j)  // bottom, outward -z
    for (int i = 0; i < nx; ++i)
      emit(lat.get(i, j, 0), lat.get(i, j + 1, 0), lat.get(i + 1, j + 1, 0),
           lat.get(i + 1, j, 0));
  for (int j = 0; j < ny; ++j)  // top, outward +z
    for (int i = 0; i < nx; ++i)
      emit(lat.get(i, j, nz), lat.get(i + 1, j, nz), lat.get(i + 1, j + 1, nz),
           lat.get(i, j + 1, nz));
  for (int k = 0; k < nz; ++k)  // x = 0, outward -x
    for (int j = 0; j < ny; ++j)
      emit(lat.get(0, j, k), lat.get(0, j, k + 1), lat.get(0, j + 1, k + 1),
           lat.get(0, j + 1, k));
  for (int k = 0; k < nz; ++k)  // x = max, outward +x
    for (int j = 0; j < ny; ++j)
      emit(lat.get(nx, j, k), lat.get(nx, j + 1, k), lat.get(nx, j + 1, k + 1),
           lat.get(nx, j, k + 1));
  for (int k = 0; k < nz; ++k)  // y = 0, outward -y
    for (int i = 0; i < nx; ++i)
      emit(lat.get(i, 0, k), lat.get(i + 1, 0, k), lat.get(i + 1, 0, k + 1),
           lat.get(i, 0, k + 1));
  for (int k = 0; k < nz; ++k)  // y = max, outward +y
    for (int i = 0; i < nx; ++i)
      emit(lat.get(i, ny, k), lat.get(i, ny, k + 1), lat.get(i + 1, ny, k + 1),
           lat.get(i + 1, ny, k));

  return QuadMesh(std::move(verts), std::move(quads), std::move(regions));
}

QuadMesh sphere_mesh(int refinements, double radius) {
  if (refinements < 1) throw Error("sphere_mesh: needs at least one refinement");
  if (!(radius > 0)) throw Error("sphere_mesh: radius must be positive");
  QuadMesh mesh = box_mesh(1, 1, 1, Vec3(-1, -1, -1), Vec3(2, 2, 2),
                           [](const Vec3& c) {
                             return c.z() < -0.99 ? Region::Inflow : Region::Shell;
                           });
  for (int r = 0; r < refinements; ++r) mesh = mesh.subdivided();

  PatchSet ps = PatchSet::build(mesh);
  if (ps.preliminary_refinement())
    throw Error("sphere_mesh: unexpected structural refinement");
  const QuadMesh& wm = ps.mesh();
  const int nv = wm.num_vertices();

  // one (face, corner slot) per vertex for corner limit evaluation
  std::vector<std::pair<int, int>> at(nv, {-1, -1});
  for (int f = 0; f < wm.num_quads(); ++f)
    for (int k = 0; k < 4; ++k)
      if (at[(size_t)wm.corner(f, k)].first < 0) at[(size_t)wm.corner(f, k)] = {f, k};

  Coeffs C = ps.reference();
  BasisValues b;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double worst = 0;
    for (int v = 0; v < nv; ++v) {
      auto [f, k] = at[(size_t)v];
      const SubdivisionPatch& p = ps.patch(f);
      double u0, v0;
      square_corner_param((k - p.rot + 4) & 3, 0.0, 0.0, u0, v0);
      ps.basis(p, u0, v0, 0, b);
      Vec3 limit = Vec3::Zero();
      for (int a = 0; a < (int)p.stencil.size(); ++a)
        limit += b.w(0, a) * C.row(p.stencil[(size_t)a]).transpose();
      double r = limit.norm();
      if (!(r > 0)) throw Error("sphere_mesh: degenerate limit point");
      worst = std::max(worst, std::fabs(r - radius));
      C.row(v) *= radius / r;
    }
    if (worst < 1e-14 * radius) break;
  }
  QuadMesh out = mesh;
  for (int v = 0; v < nv; ++v) out.set_position(v, C.row(v).transpose());
  return out;
}

InflowProfile build_inflow(const PatchSet& ps, double magnitude) {
  const QuadMesh& m = ps.mesh();
  const int nv = m.num_vertices();
  InflowProfile prof;
  prof.velocity.resize(nv, 3);
  prof.velocity.setZero();
  prof.rate = 0;
  if (magnitude == 0) return prof;

  // graph distance from the region boundary over inflow-side vertices
  std::vector<int> dist(nv, -1);
  std::queue<int> bfs;
  for (int v = 0; v < nv; ++v)
    if (m.on_boundary_curve(v)) {
      dist[(size_t)v] = 0;
      bfs.push(v);
    }
  while (!bfs.empty()) {
    int v = bfs.front();
    bfs.pop();
    for (int f : m.faces_around(v)) {
      if (m.region(f) != Region::Inflow) continue;
      int k = m.corner_slot(f, v);
      for (int d : {1, 3}) {
        int w = m.corner(f, k + d);
        if (m.touches_inflow(w) && dist[(size_t)w] < 0) {
          dist[(size_t)w] = dist[(size_t)v] + 1;
          bfs.push(w);
        }
      }
    }
  }
  int dmax = 0;
  for (int v = 0; v < nv; ++v) dmax = std::max(dmax, dist[(size_t)v]);
  if (dmax == 0) return prof;  // no interior cap vertices carry velocity

  // outward vertex normals, area-weighted over incident control faces
  for (int v = 0; v < nv; ++v) {
    if (dist[(size_t)v] <= 0) continue;
    Vec3 n = Vec3::Zero();
    for (int f : m.faces_around(v)) {
      const auto& c = m.corners(f);
      n += 0.5 * (m.position(c[2]) - m.position(c[0]))
                     .cross(m.position(c[3]) - m.position(c[1]));
    }
    double len = n.norm();
    if (!(len > 0)) throw Error("degenerate vertex normal on the inflow cap");
    double q = std::sin(0.5 * std::numbers::pi * dist[(size_t)v] / dmax);
    prof.velocity.row(v) = (q / len) * n.transpose();
  }

  Eigen::VectorXd wn = assemble_weighted_normal(ps, ps.reference(), 6);
  double flux = 0;
  for (int v = 0; v < nv; ++v)
    for (int i = 0; i < 3; ++i) flux += prof.velocity(v, i) * wn(3 * v + i);
  if (!(flux > 0)) throw Error("inflow profile carries no outflux");

  double v0 = VolumeFunctional(ps).value(ps.reference());
  double q0 = magnitude * (v0 / 4096.0) / flux;
  prof.velocity *= q0;
  prof.rate = q0 * flux;
  return prof;
}

Scenario build_scenario(const RunConfig& cfg) {
  Scenario sc;
  if (!cfg.mesh_path.empty()) {
    sc.name = "file";
    sc.mesh = load_quad_mesh(cfg.mesh_path);
    if (cfg.perturb_amplitude > 0)
      sc.mesh.perturb_interior(cfg.perturb_seed, cfg.perturb_amplitude);
    PatchSet ps = PatchSet::build(sc.mesh);
    sc.inflow = build_inflow(ps, cfg.inflow_magnitude);
    sc.fluid_velocity = sc.inflow.velocity;
    return sc;
  }

  sc.name = cfg.scenario;
  if (cfg.scenario == "balloon") {
    sc.mesh = box_mesh(4, 4, 8, Vec3(0, 0, 0), Vec3(1, 1, 2), [](const Vec3& c) {
      return c.z() < 0.5 ? Region::Inflow : Region::Shell;
    });
    if (cfg.perturb_amplitude > 0)
      sc.mesh.perturb_interior(cfg.perturb_seed, cfg.perturb_amplitude);
    PatchSet ps = PatchSet::build(sc.mesh);
    sc.inflow = build_inflow(ps, cfg.inflow_magnitude);
    sc.fluid_velocity = sc.inflow.velocity;
  } else if (cfg.scenario == "cube") {
    sc.mesh = box_mesh(1, 1, 1, Vec3(0, 0, 0), Vec3(1, 1, 1), [](const Vec3& c) {
      return c.z() < 0.25 ? Region::Inflow : Region::Shell;
    });
  } else if (cfg.scenario == "sphere_drag") {
    if (cfg.refine < 1) throw Error("sphere_drag requires refine >= 1");
    sc.mesh = sphere_mesh(cfg.refine, 1.0);
    sc.fluid_velocity.resize(sc.mesh.num_vertices(), 3);
    sc.fluid_velocity.setZero();
    sc.fluid_velocity.col(2).setOnes();
  } else if (cfg.scenario == "two_plates") {
    const double h = cfg.gap;
    sc.mesh = box_mesh(6, 6, 2, Vec3(0, 0, 0), Vec3(1, 1, h),
                       [](const Vec3& c) {
                         return (c.y() < 1e-12 && c.x() < 1.0 / 6)
                                    ? Region::Inflow
                                    : Region::Shell;
                       });
    sc.fluid_velocity.resize(sc.mesh.num_vertices(), 3);
    sc.fluid_velocity.setZero();
    for (int v = 0; v < sc.mesh.num_vertices(); ++v)
      sc.fluid_velocity(v, 2) = 0.5 - sc.mesh.position(v).z() / h;
  } else {
    throw Error("unknown scenario '" + cfg.scenario + "'");
  }
  return sc;
}

}  // namespace febe
