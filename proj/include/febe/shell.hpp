#pragma once

#include <vector>

#include <Eigen/Core>

#include "febe/subdivision.hpp"

namespace febe {

struct ShellParams {
  double nu = 0.0;             // in-plane contraction coefficient
  double thickness = 5.77e-4;  // bending length scale entering quadratically
};

// Hyperelastic thin-shell energy measured against the reference limit
// surface: membrane strain from the tangential deformation gradient, bending
// strain from the change of the shape operator, both contracted with the
// same isotropic tensor. Gradients and Hessians are exact (forward-mode
// second-order duals per quadrature point).
class ShellEnergy {
public:
  ShellEnergy(const PatchSet& ps, const ShellParams& prm, int order = 4);

  double value(const Coeffs& theta) const;

  // any output may be null; cost grows value < gradient < hessian
  void assemble(const Coeffs& theta, double* energy, Eigen::VectorXd* grad,
                Eigen::MatrixXd* hess) const;

private:
  struct QPoint {
    Eigen::Matrix<double, 5, Eigen::Dynamic> wr;  // du,dv,duu,duv,dvv rows
    double wq = 0;                                // weight * ref area element
    Eigen::Matrix<double, 3, 2> ct;               // ginv * tbar^T, precontracted
    Eigen::Matrix3d proj;                         // reference tangent projector
    Eigen::Matrix3d kref;                         // proj * reference shape gradient
  };
  const PatchSet& ps_;
  ShellParams prm_;
  std::vector<std::vector<QPoint>> qp_;
};

// enclosed volume of the configuration together with exact first and second
// derivatives; the parametric area vectors make surface measures cancel
class VolumeFunctional {
public:
  explicit VolumeFunctional(const PatchSet& ps, int order = 4);

  double value(const Coeffs& theta) const;
  void assemble(const Coeffs& theta, double* vol, Eigen::VectorXd* grad,
                Eigen::MatrixXd* hess) const;

private:
  struct QPoint {
    Eigen::Matrix<double, 3, Eigen::Dynamic> wr;  // value, du, dv rows
    double wq = 0;                                // parametric weight
  };
  const PatchSet& ps_;
  std::vector<std::vector<QPoint>> qp_;
};

}  // namespace febe
