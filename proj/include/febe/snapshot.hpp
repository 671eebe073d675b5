#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "febe/fsi.hpp"
#include "febe/stokes.hpp"
#include "febe/subdivision.hpp"

namespace febe {

// one limit-surface snapshot: welded sample grid, per-sample traction, and
// the scalar solver state
struct SnapshotData {
  Eigen::MatrixXd points;      // N x 3
  Eigen::MatrixXi cells;       // M x 4, indices into points
  Eigen::MatrixXd traction;    // N x 3
  Eigen::VectorXd traction_z;  // N
  double time = 0;
  double p0 = 0;
  double zeta = 0;
  double volume_ratio = 1;
};

// samples geometry and traction on a per-face (density+1)^2 grid; samples on
// shared edges and corners are welded to single indices, so the tessellation
// is watertight and every sample is evaluated exactly once
SnapshotData sample_surface(const PatchSet& ps, const Coeffs& theta,
                            const Coeffs& traction, int density);

// legacy polydata text, written atomically; numbers use %.17g so a re-read
// reproduces every array bitwise
void write_snapshot(const SnapshotData& snap, const std::string& path);
SnapshotData read_snapshot(const std::string& path);

void write_history(const std::vector<StepRecord>& rows, const std::string& path);
void write_newton_log(const std::vector<NewtonRecord>& rows,
                      const std::string& path);
// two-column `q count` / `q l` plot data over the observed order range
void write_histogram(const QuadratureStats& stats, const std::string& path);
void write_levels(const QuadratureStats& stats, const std::string& path);

}  // namespace febe
