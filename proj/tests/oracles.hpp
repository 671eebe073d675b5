#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "febe/mesh.hpp"
#include "febe/subdivision.hpp"

// Independent reference computations used to validate the solver modules.
// Everything here is implemented from first principles (direct polynomial
// bases, polar reduction of correlation integrals, cage refinement) and does
// not call into the quadrature or assembly code under test.
namespace oracle {

// uniform cubic B-spline patch, 16 controls in grid order (index 4*j+i,
// i along u), evaluated on the central knot span
febe::Jet2 bicubic_jet(const Eigen::Matrix<double, 16, 3>& C, double u, double v);

// integral of f(z)/|z| over the box [a1,b1]x[a2,b2], where f is piecewise
// bilinear with kinks on the axis lines listed in kinks1/kinks2 and the
// origin lies on the box boundary or inside it
double radial_potential(const std::function<double(double, double)>& f,
                        double a1, double b1, double a2, double b2,
                        const std::vector<double>& kinks1,
                        const std::vector<double>& kinks2);

// closed form of the 1/|x-y| integral over two coincident unit squares
double unit_square_self_potential();

// 1/|x-y| integral for a unit square pair sharing one edge: A = [0,1]^2,
// B = [0,1] x [-1,0]
double edge_pair_potential();

// 1/|x-y| integral for a unit square pair sharing one corner: A = [0,1]^2,
// B = [-1,0]^2
double vertex_pair_potential();

// flat polyhedral volume of the control cage (two triangles per quad)
double cage_volume(const febe::QuadMesh& m);

// volume enclosed by the subdivision limit surface, from cage volumes of
// explicit refinements with one Richardson step
double refined_limit_volume(const febe::QuadMesh& m, int levels);

// central finite differences over all interleaved coefficients
Eigen::VectorXd fd_gradient(const std::function<double(const febe::Coeffs&)>& f,
                            const febe::Coeffs& theta, double h);

// central finite difference of a gradient field along one direction
Eigen::VectorXd fd_directional_gradient(
    const std::function<Eigen::VectorXd(const febe::Coeffs&)>& grad,
    const febe::Coeffs& theta, const Eigen::VectorXd& dir, double h);

}  // namespace oracle
