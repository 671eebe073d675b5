#include <memory>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "febe/config.hpp"
#include "febe/fsi.hpp"
#include "febe/mesh.hpp"
#include "febe/scenario.hpp"
#include "febe/shell.hpp"
#include "febe/snapshot.hpp"
#include "febe/stokes.hpp"
#include "febe/subdivision.hpp"

namespace py = pybind11;
using namespace febe;

namespace {

QuadMesh mesh_from_arrays(const Eigen::MatrixXd& points,
                          const Eigen::MatrixXi& faces,
                          const std::vector<int>& regions) {
  if (points.cols() != 3) throw Error("points must be (n, 3)");
  if (faces.cols() != 4) throw Error("faces must be (m, 4)");
  std::vector<Vec3> vs(points.rows());
  for (int i = 0; i < points.rows(); ++i) vs[i] = points.row(i).transpose();
  std::vector<std::array<int, 4>> fs(faces.rows());
  std::vector<Region> rg(faces.rows(), Region::Shell);
  for (int f = 0; f < faces.rows(); ++f)
    fs[f] = {faces(f, 0), faces(f, 1), faces(f, 2), faces(f, 3)};
  if (!regions.empty()) {
    if ((int)regions.size() != faces.rows())
      throw Error("regions must have one entry per face");
    for (int f = 0; f < faces.rows(); ++f)
      rg[f] = regions[f] ? Region::Inflow : Region::Shell;
  }
  return QuadMesh(std::move(vs), std::move(fs), std::move(rg));
}

Eigen::MatrixXd mesh_points(const QuadMesh& m) {
  Eigen::MatrixXd out(m.num_vertices(), 3);
  for (int v = 0; v < m.num_vertices(); ++v)
    out.row(v) = m.position(v).transpose();
  return out;
}

Eigen::MatrixXi mesh_faces(const QuadMesh& m) {
  Eigen::MatrixXi out(m.num_quads(), 4);
  for (int f = 0; f < m.num_quads(); ++f)
    for (int k = 0; k < 4; ++k) out(f, k) = m.corners(f)[k];
  return out;
}

std::vector<int> mesh_regions(const QuadMesh& m) {
  std::vector<int> out(m.num_quads());
  for (int f = 0; f < m.num_quads(); ++f)
    out[f] = m.region(f) == Region::Inflow ? 1 : 0;
  return out;
}

// PatchSet owner exposed to python
struct Surface {
  explicit Surface(const QuadMesh& m) : ps(PatchSet::build(m)) {}
  PatchSet ps;
};

py::dict jet_dict(const Jet2& j, int order) {
  py::dict d;
  d["x"] = Vec3(j.x);
  if (order >= 1) {
    d["xu"] = Vec3(j.xu);
    d["xv"] = Vec3(j.xv);
  }
  if (order >= 2) {
    d["xuu"] = Vec3(j.xuu);
    d["xuv"] = Vec3(j.xuv);
    d["xvv"] = Vec3(j.xvv);
  }
  return d;
}

// driver bundle: the PatchSet must outlive the FsiDriver that references it
struct Simulation {
  explicit Simulation(const std::string& config_text)
      : cfg(parse_config_text(config_text)),
        scenario(build_scenario(cfg)),
        ps(PatchSet::build(scenario.mesh)) {
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
    driver = std::make_unique<FsiDriver>(ps, scenario.inflow, cs);
    state = driver->initial_state();
  }

  py::dict step() {
    driver->step(state);
    const StepRecord& r = driver->history().back();
    py::dict d;
    d["t"] = r.t;
    d["volume"] = r.volume;
    d["p0"] = r.p0;
    d["min_gap"] = r.min_gap;
    d["subiters"] = r.subiters;
    d["newton_total"] = r.newton_total;
    return d;
  }

  RunConfig cfg;
  Scenario scenario;
  PatchSet ps;
  std::unique_ptr<FsiDriver> driver;
  FsiState state;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "subdivision-shell / boundary-integral flow solver core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "SolverError");

  py::class_<QuadMesh>(m, "Mesh")
      .def(py::init(&mesh_from_arrays), py::arg("points"), py::arg("faces"),
           py::arg("regions") = std::vector<int>{})
      .def_property_readonly("num_vertices", &QuadMesh::num_vertices)
      .def_property_readonly("num_quads", &QuadMesh::num_quads)
      .def_property_readonly("points", &mesh_points)
      .def_property_readonly("faces", &mesh_faces)
      .def_property_readonly("regions", &mesh_regions)
      .def("euler_characteristic", &QuadMesh::euler_characteristic)
      .def("valence", &QuadMesh::valence, py::arg("vertex"))
      .def("subdivided", &QuadMesh::subdivided)
      .def("save", [](const QuadMesh& mesh, const std::string& path) {
        save_quad_mesh(mesh, path);
      });

  m.def("load_mesh", &load_quad_mesh, py::arg("path"));

  py::class_<Surface>(m, "Surface")
      .def(py::init<const QuadMesh&>(), py::arg("mesh"))
      .def_property_readonly(
          "num_patches", [](const Surface& s) { return s.ps.num_patches(); })
      .def_property_readonly(
          "preliminary_refinement",
          [](const Surface& s) { return s.ps.preliminary_refinement(); })
      .def_property_readonly(
          "mesh", [](const Surface& s) -> const QuadMesh& { return s.ps.mesh(); },
          py::return_value_policy::reference_internal)
      .def_property_readonly(
          "reference", [](const Surface& s) { return Coeffs(s.ps.reference()); })
      .def("evaluate",
           [](const Surface& s, int face, const Coeffs& coeffs, double u,
              double v, int order) {
             if (face < 0 || face >= s.ps.num_patches())
               throw Error("patch index out of range");
             Jet2 j = s.ps.evaluate(s.ps.patch(face), coeffs, u, v, order);
             return jet_dict(j, order);
           },
           py::arg("face"), py::arg("coeffs"), py::arg("u"), py::arg("v"),
           py::arg("order") = 1)
      .def("sample",
           [](const Surface& s, const Coeffs& theta, const Coeffs& traction,
              int density) {
             SnapshotData snap = sample_surface(s.ps, theta, traction, density);
             py::dict d;
             d["points"] = snap.points;
             d["cells"] = snap.cells;
             d["traction"] = snap.traction;
             d["traction_z"] = snap.traction_z;
             return d;
           },
           py::arg("theta"), py::arg("traction"), py::arg("density") = 4);

  m.def("shell_energy",
        [](const Surface& s, const Coeffs& theta, double nu, double thickness) {
          return ShellEnergy(s.ps, ShellParams{nu, thickness}).value(theta);
        },
        py::arg("surface"), py::arg("theta"), py::arg("nu") = 0.0,
        py::arg("thickness") = 5.77e-4);

  m.def("shell_gradient",
        [](const Surface& s, const Coeffs& theta, double nu, double thickness) {
          Eigen::VectorXd g;
          ShellEnergy(s.ps, ShellParams{nu, thickness})
              .assemble(theta, nullptr, &g, nullptr);
          Eigen::MatrixXd out(theta.rows(), 3);
          for (int v = 0; v < theta.rows(); ++v)
            for (int i = 0; i < 3; ++i) out(v, i) = g(3 * v + i);
          return out;
        },
        py::arg("surface"), py::arg("theta"), py::arg("nu") = 0.0,
        py::arg("thickness") = 5.77e-4);

  m.def("volume",
        [](const Surface& s, const Coeffs& theta) {
          return VolumeFunctional(s.ps).value(theta);
        },
        py::arg("surface"), py::arg("theta"));

  m.def("stokes_solve",
        [](const Surface& s, const Coeffs& theta, const Coeffs& velocity,
           double viscosity_ratio, int q_min, int q_max, double tol) {
          BoundaryOperators ops(s.ps);
          QuadratureStats stats;
          ops.assemble(theta, viscosity_ratio, QuadratureParams{q_min, q_max, tol},
                       stats);
          BoundaryOperators::Solution sol = ops.solve(ops.velocity_rhs(velocity));
          Vec3 force = Vec3::Zero();
          for (int v = 0; v < theta.rows(); ++v)
            force += ops.basis_measure()(v) * sol.traction.row(v).transpose();
          py::dict d;
          d["traction"] = sol.traction;
          d["zeta"] = sol.zeta;
          d["force"] = Vec3(force);
          d["nonconverged"] = stats.nonconverged;
          return d;
        },
        py::arg("surface"), py::arg("theta"), py::arg("velocity"),
        py::arg("viscosity_ratio") = 1.0, py::arg("q_min") = 2,
        py::arg("q_max") = 36, py::arg("tol") = 1e-7);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("mesh", &Scenario::mesh)
      .def_property_readonly(
          "inflow_velocity",
          [](const Scenario& s) { return Coeffs(s.inflow.velocity); })
      .def_property_readonly("inflow_rate",
                             [](const Scenario& s) { return s.inflow.rate; })
      .def_property_readonly(
          "fluid_velocity",
          [](const Scenario& s) { return Coeffs(s.fluid_velocity); });

  m.def("make_scenario",
        [](const std::string& config_text) {
          return build_scenario(parse_config_text(config_text));
        },
        py::arg("config_text"));

  m.def("default_config", []() { return serialize_config(RunConfig{}); });

  py::class_<Simulation>(m, "Simulation")
      .def(py::init<const std::string&>(), py::arg("config_text"))
      .def("step", &Simulation::step)
      .def_property_readonly(
          "t", [](const Simulation& s) { return s.state.t; })
      .def_property_readonly(
          "p0", [](const Simulation& s) { return s.state.p0; })
      .def_property_readonly(
          "theta", [](const Simulation& s) { return Coeffs(s.state.theta); })
      .def_property_readonly(
          "velocity",
          [](const Simulation& s) { return Coeffs(s.state.velocity); })
      .def_property_readonly(
          "traction",
          [](const Simulation& s) { return Coeffs(s.state.traction); })
      .def_property_readonly(
          "reference_volume",
          [](const Simulation& s) { return s.driver->reference_volume(); })
      .def_property_readonly("volume", [](const Simulation& s) {
        return s.driver->structural().volume(s.state.theta);
      });
}
