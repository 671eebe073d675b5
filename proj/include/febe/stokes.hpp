#pragma once

#include <map>
#include <memory>
#include <vector>

#include <numbers>

#include <Eigen/Core>
#include <Eigen/LU>

#include "febe/quadrature.hpp"
#include "febe/subdivision.hpp"

namespace febe {

// free-space Stokes kernels (unit viscosity)
inline Eigen::Matrix3d stokeslet(const Vec3& r) {
  double R2 = r.squaredNorm();
  double R = std::sqrt(R2);
  if (!(R > 0)) throw Error("stokeslet evaluated at zero separation");
  constexpr double c = 1.0 / (8.0 * std::numbers::pi);
  return c * (Eigen::Matrix3d::Identity() / R + (r * r.transpose()) / (R2 * R));
}

// traction kernel of the double layer, n taken at the source point y, r = x-y
inline Eigen::Matrix3d stresslet(const Vec3& r, const Vec3& ny) {
  double R2 = r.squaredNorm();
  double R = std::sqrt(R2);
  if (!(R > 0)) throw Error("stresslet evaluated at zero separation");
  constexpr double c = 3.0 / (4.0 * std::numbers::pi);
  double f = c * r.dot(ny) / (R2 * R2 * R);
  return f * (r * r.transpose());
}

struct QuadratureParams {
  int q_min = 2;
  int q_max = 36;
  double tol = 1e-7;  // absolute, max-norm of assembled pair blocks
};

struct QuadratureStats {
  std::vector<long> accepted;  // index = tensor order, count of pairs
  long nonconverged = 0;
  void record(int q) {
    if ((int)accepted.size() <= q) accepted.resize((size_t)q + 1, 0);
    ++accepted[(size_t)q];
  }
  void merge(const QuadratureStats& o) {
    if (o.accepted.size() > accepted.size()) accepted.resize(o.accepted.size(), 0);
    for (size_t i = 0; i < o.accepted.size(); ++i) accepted[i] += o.accepted[i];
    nonconverged += o.nonconverged;
  }
};

// Galerkin surface operators on the deformed configuration. All matrices use
// interleaved vertex dofs (vertex a, component i) -> row 3a+i.
class BoundaryOperators {
public:
  explicit BoundaryOperators(const PatchSet& ps) : ps_(ps) {}

  // viscosity ratio lambda: finite value, or +inf for the exterior-only form;
  // the double layer is skipped when lambda == 1
  void assemble(const Coeffs& theta, double lambda, const QuadratureParams& qp,
                QuadratureStats& stats);

  const Eigen::MatrixXd& single_layer() const { return V_; }
  const Eigen::MatrixXd& double_layer() const { return K_; }
  const Eigen::MatrixXd& bem_mass() const { return M_; }
  const Eigen::VectorXd& weighted_normal() const { return g_; }
  const Eigen::VectorXd& basis_measure() const { return area_; }
  bool has_double_layer() const { return K_.size() > 0; }

  // [(1+lambda)/2 M + (1-lambda) K] gbar, or [-M/2 + K] gbar at lambda = inf
  Eigen::VectorXd velocity_rhs(const Coeffs& gbar) const;

  // solve [[V, g], [g^T, 0]] (t, zeta) = (rhs, 0)
  struct Solution {
    Coeffs traction;
    double zeta = 0;
  };
  Solution solve(const Eigen::VectorXd& rhs) const;

private:
  const PatchSet& ps_;
  double lambda_ = 1;
  Eigen::MatrixXd V_, K_, M_;
  Eigen::VectorXd g_, area_;
  mutable Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  mutable bool factored_ = false;
};

// component-diagonal mass matrix int phi_a phi_b dS on the given geometry
Eigen::MatrixXd assemble_surface_mass(const PatchSet& ps, const Coeffs& geometry,
                                      int order);
// per-dof integral int phi_a n_i dS (3V)
Eigen::VectorXd assemble_weighted_normal(const PatchSet& ps,
                                         const Coeffs& geometry, int order);
// per-vertex integral int phi_a dS (V)
Eigen::VectorXd assemble_basis_measure(const PatchSet& ps,
                                       const Coeffs& geometry, int order);

// smallest sample distance between non-adjacent elements (interior grid of
// samples_per_dim^2 points per element); brute force
double min_gap(const PatchSet& ps, const Coeffs& geometry, int samples_per_dim);

}  // namespace febe
