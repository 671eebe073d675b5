#pragma once

#include <vector>

#include <Eigen/Dense>

#include "febe/mesh.hpp"
#include "febe/shell.hpp"
#include "febe/stokes.hpp"
#include "febe/subdivision.hpp"

namespace febe {

// boundary velocity data on the inflow cap, constant in time (the cap is
// clamped); `rate` is the volumetric outflux per unit time carried by
// `velocity`, positive when the enclosed volume shrinks
struct InflowProfile {
  Coeffs velocity;
  double rate = 0;
};

struct CouplingSettings {
  double tau = 4.0;
  double tol = 1e-6;
  double lambda = 1.0;
  double varpi = 1e-5;
  int max_subiterations = 20;
  int max_newton = 30;
  ShellParams shell;
  QuadratureParams quad;
};

struct NewtonResult {
  Coeffs theta;
  double p0 = 0;
  int iterations = 0;
  double residual = 0;
  bool pre_converged = false;  // residual met the tolerance before any iteration
};

// implicit-Euler structural step with the volume constraint enforced through
// its multiplier p0; the fluid traction enters as a fixed load
class StructuralSolver {
 public:
  StructuralSolver(const PatchSet& ps, const ShellParams& prm, double varpi,
                   int order = 4);

  NewtonResult step(const Coeffs& theta_init, const Coeffs& theta_n,
                    const Coeffs& v_n, const Coeffs& traction, double p0_init,
                    double target_volume, double tau, double tol,
                    int max_newton) const;

  // L_c = ∮ φ_c ⊗ t̄ over the current surface, and its configuration Jacobian
  void load(const Coeffs& theta, const Coeffs& traction, Eigen::VectorXd* out,
            Eigen::MatrixXd* jac) const;

  // true when every sampled current area vector points to the same side as
  // the reference one (no inverted elements)
  bool orientation_ok(const Coeffs& theta) const;

  double volume(const Coeffs& theta) const { return volume_.value(theta); }
  const VolumeFunctional& volume_functional() const { return volume_; }
  const ShellEnergy& energy() const { return energy_; }
  const Eigen::MatrixXd& mass() const { return mass_; }
  const std::vector<int>& free_vertices() const { return free_; }

 private:
  struct LoadQP {
    Eigen::Matrix<double, 3, Eigen::Dynamic> wr;  // value, du, dv rows
    double w = 0;
    Vec3 nref;  // reference area vector
  };

  const PatchSet& ps_;
  ShellParams prm_;
  double varpi_;
  ShellEnergy energy_;
  VolumeFunctional volume_;
  Eigen::MatrixXd mass_;
  std::vector<int> free_;
  std::vector<std::vector<LoadQP>> lqp_;
};

struct FsiState {
  double t = 0;
  Coeffs theta;
  Coeffs theta_prev;
  Coeffs velocity;
  Coeffs traction;
  double p0 = 0;
  double zeta = 0;
  double influx = 0;  // accumulated outflux
  int last_subiters = 0;
  int last_newton = 0;
  long last_quad_nonconv = 0;
};

struct StepRecord {
  double t = 0;
  double volume = 0;
  double p0 = 0;
  double min_gap = 0;
  int subiters = 0;
  int newton_total = 0;
  long quad_nonconv = 0;
};

struct NewtonRecord {
  int step = 0;
  int subiter = 0;
  int iterations = 0;
  double residual = 0;
  double p0 = 0;
};

class FsiDriver {
 public:
  FsiDriver(const PatchSet& ps, InflowProfile inflow, CouplingSettings cs);

  FsiState initial_state() const;

  // one time step: predictor followed by structure-then-fluid subiterations;
  // throws Error when the subiteration or Newton budget is exhausted
  void step(FsiState& s);

  const std::vector<StepRecord>& history() const { return history_; }
  const std::vector<NewtonRecord>& newton_log() const { return newton_log_; }
  const QuadratureStats& quadrature_stats() const { return stats_; }
  double reference_volume() const { return volume0_; }
  const InflowProfile& inflow() const { return inflow_; }
  const CouplingSettings& settings() const { return cs_; }
  const StructuralSolver& structural() const { return structural_; }
  const PatchSet& patches() const { return ps_; }

 private:
  const PatchSet& ps_;
  InflowProfile inflow_;
  CouplingSettings cs_;
  StructuralSolver structural_;
  BoundaryOperators fluid_;
  QuadratureStats stats_;
  double volume0_ = 0;
  std::vector<StepRecord> history_;
  std::vector<NewtonRecord> newton_log_;
  int step_index_ = 0;
};

}  // namespace febe
