#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "doctest.h"
#include "febe/scenario.hpp"
#include "febe/shell.hpp"
#include "febe/stokes.hpp"
#include "oracles.hpp"

using namespace febe;

namespace {

QuadMesh raw_cube() {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                         {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  std::vector<std::array<int, 4>> q = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                       {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  std::vector<Region> r(6, Region::Shell);
  r[0] = Region::Inflow;
  return QuadMesh(std::move(v), std::move(q), std::move(r));
}

Coeffs random_dirs(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  Coeffs c(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = g(rng);
  c /= c.cwiseAbs().maxCoeff();
  return c;
}

Eigen::Map<const Eigen::VectorXd> flat(const Coeffs& c) {
  return Eigen::Map<const Eigen::VectorXd>(c.data(), 3 * c.rows());
}

}  // namespace

TEST_CASE("elastic energy vanishes in the rest configuration") {
  PatchSet ps = PatchSet::build(sphere_mesh(2, 1.0));
  ShellParams prm;
  ShellEnergy energy(ps, prm, 4);
  double w0 = energy.value(ps.reference());
  CHECK(std::abs(w0) <= 1e-14);

  double w = 0;
  Eigen::VectorXd grad;
  energy.assemble(ps.reference(), &w, &grad, nullptr);
  CHECK(std::abs(w) <= 1e-14);
  CHECK(grad.lpNorm<Eigen::Infinity>() <= 1e-12);

  // any deformation costs energy
  Coeffs squeezed = ps.reference();
  squeezed.col(2) *= 0.9;
  CHECK(energy.value(squeezed) > 0);
}

TEST_CASE("energy gradient and hessian match finite differences") {
  PatchSet ps = PatchSet::build(sphere_mesh(2, 1.0));
  const int nv = ps.mesh().num_vertices();
  ShellParams prm;
  prm.nu = 0.3;  // exercise the trace coupling too
  ShellEnergy energy(ps, prm, 4);

  std::mt19937 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    Coeffs theta = ps.reference() + 0.01 * random_dirs(nv, 100 + trial);
    double w = 0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    energy.assemble(theta, &w, &grad, &hess);
    CHECK(w > 0);

    // gradient against centered differences of the value
    Coeffs dir = random_dirs(nv, 200 + trial);
    const double h = 1e-5;
    Coeffs tp = theta + h * dir, tm = theta - h * dir;
    double fd = (energy.value(tp) - energy.value(tm)) / (2 * h);
    double an = grad.dot(flat(dir));
    CHECK(std::abs(fd - an) < 1e-6 * (1 + std::abs(an)));

    // hessian action against centered differences of the gradient
    Eigen::VectorXd hfd = oracle::fd_directional_gradient(
        [&](const Coeffs& t) {
          Eigen::VectorXd g;
          energy.assemble(t, nullptr, &g, nullptr);
          return g;
        },
        theta, flat(dir), 1e-5);
    Eigen::VectorXd han = hess * flat(dir);
    CHECK((hfd - han).lpNorm<Eigen::Infinity>() <
          1e-5 * (1 + han.lpNorm<Eigen::Infinity>()));

    double hsym = (hess - hess.transpose()).cwiseAbs().maxCoeff();
    CHECK(hsym < 1e-10 * hess.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("energy is frame indifferent") {
  PatchSet ps = PatchSet::build(sphere_mesh(1, 1.0));
  const int nv = ps.mesh().num_vertices();
  ShellEnergy energy(ps, ShellParams{}, 4);
  Coeffs theta = ps.reference() + 0.05 * random_dirs(nv, 7);
  double w = energy.value(theta);

  Eigen::Matrix3d R =
      Eigen::AngleAxisd(1.1, Vec3(0.3, 1, -0.5).normalized()).toRotationMatrix();
  Vec3 b(0.4, -2.0, 0.9);
  Coeffs moved = (theta * R.transpose()).rowwise() + b.transpose();
  CHECK(std::abs(energy.value(moved) - w) < 1e-10 * (1 + std::abs(w)));

  Eigen::VectorXd g1, g2;
  energy.assemble(theta, nullptr, &g1, nullptr);
  energy.assemble(moved, nullptr, &g2, nullptr);
  for (int a = 0; a < nv; ++a) {
    Vec3 want = R * g1.segment<3>(3 * a);
    CHECK((g2.segment<3>(3 * a) - want).norm() < 1e-10 * (1 + want.norm()));
  }
}

TEST_CASE("energy is quadratic near the rest state") {
  PatchSet ps = PatchSet::build(sphere_mesh(1, 1.0));
  ShellEnergy energy(ps, ShellParams{}, 4);
  Coeffs dir = random_dirs(ps.mesh().num_vertices(), 13);
  auto ratio = [&](double a) {
    return energy.value(ps.reference() + a * dir) / (a * a);
  };
  double r1 = ratio(1e-3), r2 = ratio(5e-4), r3 = ratio(2.5e-4);
  CHECK(std::abs(r2 - r1) < 5e-3 * std::abs(r1));
  CHECK(std::abs(r3 - r2) < std::abs(r2 - r1));
}

TEST_CASE("enclosed volume of the cube limit surface") {
  PatchSet ps = PatchSet::build(raw_cube());
  VolumeFunctional vol(ps, 4);
  double v = vol.value(ps.reference());
  // independent value: cage volumes extrapolated across explicit refinements
  double want = oracle::refined_limit_volume(raw_cube(), 7);
  CHECK(std::abs(want - 0.327552) < 5e-4);
  // order 4 carries the corner-patch quadrature error; higher order shrinks it
  CHECK(std::abs(v - want) < 5e-4 * want);
  double v10 = VolumeFunctional(ps, 10).value(ps.reference());
  CHECK(std::abs(v10 - want) < std::abs(v - want));
  CHECK(std::abs(v10 - want) < 1e-4 * want);

  // the functional is a property of the limit surface, not the control mesh
  PatchSet fine = PatchSet::build(raw_cube().subdivided());
  VolumeFunctional vol2(fine, 4);
  CHECK(std::abs(vol2.value(fine.reference()) - v) < 1e-4 * v);

  // the limit blob sits well inside its unit control cube
  CHECK(v < 0.5);
  CHECK(v > 0.25);
}

TEST_CASE("volume derivatives and invariances") {
  PatchSet ps = PatchSet::build(sphere_mesh(1, 1.0));
  const int nv = ps.mesh().num_vertices();
  VolumeFunctional vol(ps, 4);
  double v0 = vol.value(ps.reference());
  CHECK(std::abs(v0 - 4 * std::numbers::pi / 3) < 0.02 * (4 * std::numbers::pi / 3));

  double v = 0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  vol.assemble(ps.reference(), &v, &grad, &hess);
  CHECK(v == v0);

  // translations do not change the enclosed volume
  Coeffs trans = Coeffs::Zero(nv, 3);
  trans.col(1).setOnes();
  CHECK(std::abs(grad.dot(flat(trans))) < 1e-10 * (1 + std::abs(v0)));
  Coeffs moved = ps.reference();
  moved.col(1).array() += 3.0;
  CHECK(std::abs(vol.value(moved) - v0) < 1e-12 * (1 + std::abs(v0)));

  // scaling is cubic
  CHECK(std::abs(vol.value(1.5 * ps.reference()) - 1.5 * 1.5 * 1.5 * v0) <
        1e-10 * v0);

  // the functional is homogeneous of degree three
  CHECK(std::abs(grad.dot(flat(ps.reference())) - 3 * v0) < 1e-12 * v0);

  // the gradient is the weighted normal, up to quadrature consistency
  VolumeFunctional vol8(ps, 8);
  Eigen::VectorXd grad8;
  vol8.assemble(ps.reference(), nullptr, &grad8, nullptr);
  Eigen::VectorXd wn = assemble_weighted_normal(ps, ps.reference(), 8);
  CHECK((grad8 - wn).lpNorm<Eigen::Infinity>() <
        1e-4 * wn.lpNorm<Eigen::Infinity>());

  // derivative checks on a deformed state
  Coeffs theta = ps.reference() + 0.05 * random_dirs(nv, 3);
  vol.assemble(theta, &v, &grad, &hess);
  Coeffs dir = random_dirs(nv, 4);
  const double h = 1e-5;
  double fd = (vol.value(theta + h * dir) - vol.value(theta - h * dir)) / (2 * h);
  CHECK(std::abs(fd - grad.dot(flat(dir))) < 1e-8 * (1 + std::abs(fd)));
  Eigen::VectorXd hfd = oracle::fd_directional_gradient(
      [&](const Coeffs& t) {
        Eigen::VectorXd g;
        vol.assemble(t, nullptr, &g, nullptr);
        return g;
      },
      theta, flat(dir), 1e-5);
  Eigen::VectorXd han = hess * flat(dir);
  CHECK((hfd - han).lpNorm<Eigen::Infinity>() <
        1e-6 * (1 + han.lpNorm<Eigen::Infinity>()));
  CHECK((hess - hess.transpose()).cwiseAbs().maxCoeff() <
        1e-12 * (1 + hess.cwiseAbs().maxCoeff()));
}
