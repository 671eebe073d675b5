#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

namespace oracle {

namespace {

void spline_basis(double t, double* b, double* d1, double* d2) {
  // uniform cubic B-spline segment polynomials and derivatives
  double t2 = t * t, t3 = t2 * t;
  b[0] = (1 - 3 * t + 3 * t2 - t3) / 6;
  b[1] = (4 - 6 * t2 + 3 * t3) / 6;
  b[2] = (1 + 3 * t + 3 * t2 - 3 * t3) / 6;
  b[3] = t3 / 6;
  d1[0] = (-3 + 6 * t - 3 * t2) / 6;
  d1[1] = (-12 * t + 9 * t2) / 6;
  d1[2] = (3 + 6 * t - 9 * t2) / 6;
  d1[3] = 3 * t2 / 6;
  d2[0] = 1 - t;
  d2[1] = (-12 + 18 * t) / 6;
  d2[2] = (6 - 18 * t) / 6;
  d2[3] = t;
}

// 16-point Gauss-Legendre on [0,1]
const double kG16x[16] = {
    0.0052995325041750337, 0.0277124884633837,   0.06718439880608412,
    0.12229779582249845,   0.19106187779867811,  0.27099161117138627,
    0.35919822461037054,   0.45249374508118123,  0.5475062549188188,
    0.6408017753896295,    0.7290083888286137,   0.8089381222013219,
    0.8777022041749816,    0.9328156011939159,   0.9722875115366162,
    0.9947004674958249};
const double kG16w[16] = {
    0.013576229705877047, 0.031126761969323946, 0.04757925584124639,
    0.06231448562776694,  0.07479799440828837,  0.08457825969750127,
    0.09130170752246179,  0.0947253052275342,   0.0947253052275342,
    0.09130170752246179,  0.08457825969750127,  0.07479799440828837,
    0.06231448562776694,  0.04757925584124639,  0.031126761969323946,
    0.013576229705877047};

}  // namespace

febe::Jet2 bicubic_jet(const Eigen::Matrix<double, 16, 3>& C, double u, double v) {
  double bu[4], du[4], su[4], bv[4], dv[4], sv[4];
  spline_basis(u, bu, du, su);
  spline_basis(v, bv, dv, sv);
  febe::Jet2 out;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      febe::Vec3 p = C.row(4 * j + i).transpose();
      out.x += bu[i] * bv[j] * p;
      out.xu += du[i] * bv[j] * p;
      out.xv += bu[i] * dv[j] * p;
      out.xuu += su[i] * bv[j] * p;
      out.xuv += du[i] * dv[j] * p;
      out.xvv += bu[i] * sv[j] * p;
    }
  return out;
}

double radial_potential(const std::function<double(double, double)>& f,
                        double a1, double b1, double a2, double b2,
                        const std::vector<double>& kinks1,
                        const std::vector<double>& kinks2) {
  // polar reduction about the origin: the 1/|z| factor cancels the polar
  // Jacobian, so the radial integrand is piecewise polynomial along rays
  std::vector<double> lines1(kinks1), lines2(kinks2);
  lines1.push_back(a1);
  lines1.push_back(b1);
  lines2.push_back(a2);
  lines2.push_back(b2);

  std::vector<double> angles;
  for (double k1 : lines1)
    for (double k2 : lines2) {
      if (k1 == 0 && k2 == 0) continue;
      if (k1 < a1 - 1e-14 || k1 > b1 + 1e-14) continue;
      if (k2 < a2 - 1e-14 || k2 > b2 + 1e-14) continue;
      angles.push_back(std::atan2(k2, k1));
    }
  bool interior = a1 < 0 && b1 > 0 && a2 < 0 && b2 > 0;
  if (interior) {
    angles.push_back(-std::numbers::pi);
    angles.push_back(std::numbers::pi);
  }
  std::sort(angles.begin(), angles.end());
  angles.erase(std::unique(angles.begin(), angles.end(),
                           [](double a, double b) { return std::fabs(a - b) < 1e-13; }),
               angles.end());

  double total = 0;
  for (size_t p = 0; p + 1 < angles.size(); ++p) {
    double lo = angles[p], hi = angles[p + 1];
    if (hi - lo < 1e-13) continue;
    for (int gi = 0; gi < 16; ++gi) {
      double phi = lo + (hi - lo) * kG16x[gi];
      double c = std::cos(phi), s = std::sin(phi);
      // exit radius of the box along this ray
      double R = std::numeric_limits<double>::infinity();
      if (c > 1e-15) R = std::min(R, b1 / c);
      if (c < -1e-15) R = std::min(R, a1 / c);
      if (s > 1e-15) R = std::min(R, b2 / s);
      if (s < -1e-15) R = std::min(R, a2 / s);
      if (!(R > 0) || !std::isfinite(R)) continue;
      // radial breakpoints where the ray crosses a kink line
      std::vector<double> rs{0.0, R};
      auto add = [&](double r) {
        if (r > 1e-13 && r < R - 1e-13) rs.push_back(r);
      };
      if (std::fabs(c) > 1e-15)
        for (double k : kinks1) add(k / c);
      if (std::fabs(s) > 1e-15)
        for (double k : kinks2) add(k / s);
      std::sort(rs.begin(), rs.end());
      double F = 0;
      for (size_t r = 0; r + 1 < rs.size(); ++r) {
        double r0 = rs[r], r1 = rs[r + 1];
        if (r1 - r0 < 1e-15) continue;
        // f is at most quadratic in r between breakpoints; 16 points is
        // far more than exact
        double piece = 0;
        for (int gr = 0; gr < 16; ++gr) {
          double rr = r0 + (r1 - r0) * kG16x[gr];
          piece += kG16w[gr] * f(rr * c, rr * s);
        }
        F += (r1 - r0) * piece;
      }
      total += (hi - lo) * kG16w[gi] * F;
    }
  }
  return total;
}

double unit_square_self_potential() {
  // polar evaluation of the correlation form gives
  //   I = 4 asinh(1) - (4/3)(sqrt(2) - 1)
  return 4.0 * std::asinh(1.0) - 4.0 * (std::sqrt(2.0) - 1.0) / 3.0;
}

namespace {
double hat(double t) { return std::max(0.0, 1.0 - std::fabs(t)); }
double tri(double t) { return t <= 0 || t >= 2 ? 0.0 : (t < 1 ? t : 2 - t); }
}  // namespace

double edge_pair_potential() {
  return radial_potential([](double z1, double z2) { return hat(z1) * tri(z2); },
                          -1, 1, 0, 2, {-1, 0, 1}, {0, 1, 2});
}

double vertex_pair_potential() {
  return radial_potential([](double z1, double z2) { return tri(z1) * tri(z2); },
                          0, 2, 0, 2, {0, 1, 2}, {0, 1, 2});
}

double cage_volume(const febe::QuadMesh& m) {
  double six_v = 0;
  for (int f = 0; f < m.num_quads(); ++f) {
    febe::Vec3 a = m.position(m.corners(f)[0]);
    febe::Vec3 b = m.position(m.corners(f)[1]);
    febe::Vec3 c = m.position(m.corners(f)[2]);
    febe::Vec3 d = m.position(m.corners(f)[3]);
    six_v += a.dot(b.cross(c)) + a.dot(c.cross(d));
  }
  return six_v / 6.0;
}

double refined_limit_volume(const febe::QuadMesh& m, int levels) {
  febe::QuadMesh cur = m;
  for (int l = 1; l < levels; ++l) cur = cur.subdivided();
  double v_prev = cage_volume(cur);
  cur = cur.subdivided();
  double v_last = cage_volume(cur);
  // cage volume approaches the limit volume as O(4^-level)
  return v_last + (v_last - v_prev) / 3.0;
}

Eigen::VectorXd fd_gradient(const std::function<double(const febe::Coeffs&)>& f,
                            const febe::Coeffs& theta, double h) {
  Eigen::VectorXd g(3 * theta.rows());
  febe::Coeffs work = theta;
  for (int v = 0; v < theta.rows(); ++v)
    for (int c = 0; c < 3; ++c) {
      double base = theta(v, c);
      work(v, c) = base + h;
      double fp = f(work);
      work(v, c) = base - h;
      double fm = f(work);
      work(v, c) = base;
      g(3 * v + c) = (fp - fm) / (2 * h);
    }
  return g;
}

Eigen::VectorXd fd_directional_gradient(
    const std::function<Eigen::VectorXd(const febe::Coeffs&)>& grad,
    const febe::Coeffs& theta, const Eigen::VectorXd& dir, double h) {
  febe::Coeffs tp = theta, tm = theta;
  for (int v = 0; v < theta.rows(); ++v)
    for (int c = 0; c < 3; ++c) {
      tp(v, c) += h * dir(3 * v + c);
      tm(v, c) -= h * dir(3 * v + c);
    }
  return (grad(tp) - grad(tm)) / (2 * h);
}

}  // namespace oracle
