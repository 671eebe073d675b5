#pragma once

#include <cstdint>
#include <string>

namespace febe {

// flat key = value run configuration; defaults are the reference parameter
// set used throughout the deflation study
struct RunConfig {
  std::string scenario = "balloon";  // balloon | sphere_drag | two_plates | cube
  std::string mesh_path;             // when nonempty, geometry loads from file
  double poisson_ratio = 0.0;
  double bending_scale = 5.77e-4;
  double coupling_strength = 1e-5;
  double viscosity_ratio = 1.0;  // interior/exterior; "inf" selects the
                                 // exterior-only problem
  double time_step = 4.0;
  int steps = 20;
  double tolerance = 1e-6;
  double quad_tol = 1e-7;
  int quad_min_order = 2;
  int quad_max_order = 36;
  double perturb_amplitude = 0.01;
  std::uint64_t perturb_seed = 1;
  double inflow_magnitude = 1.0;  // scales the calibrated emptying rate
  std::string output_dir = "out";
  int snapshot_cadence = 5;
  int max_subiterations = 20;
  int max_newton = 30;
  double gap = 0.05;  // plate separation of the two_plates scenario
  int refine = 1;     // refinement level of the sphere_drag scenario

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);
std::string serialize_config(const RunConfig& cfg);

}  // namespace febe
