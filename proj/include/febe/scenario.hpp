#pragma once

#include <functional>
#include <string>

#include "febe/config.hpp"
#include "febe/fsi.hpp"
#include "febe/mesh.hpp"

namespace febe {

// Geometry plus boundary data of one runnable case. `inflow` is sized for
// the working mesh of a PatchSet built from `mesh` (empty means zero);
// `fluid_velocity` is the Dirichlet data used by single fluid solves.
struct Scenario {
  std::string name;
  QuadMesh mesh;
  InflowProfile inflow;
  Coeffs fluid_velocity;
};

// axis-aligned box surface mesh with nx*ny*nz interior cells; faces are
// tagged by their center point
QuadMesh box_mesh(int nx, int ny, int nz, const Vec3& origin, const Vec3& size,
                  const std::function<Region(const Vec3&)>& classify);

// cube control mesh refined `refinements` times (>= 1) and fitted so every
// control vertex has its limit point on the sphere |x| = radius
QuadMesh sphere_mesh(int refinements, double radius = 1.0);

// sine-shaped boundary velocity on the inflow cap, directed outward and
// vanishing on the region boundary, scaled so the carried outflux empties
// the enclosed volume at t = 2^12 (times `magnitude`)
InflowProfile build_inflow(const PatchSet& ps, double magnitude);

Scenario build_scenario(const RunConfig& cfg);

}  // namespace febe
