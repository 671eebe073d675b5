#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "febe/mesh.hpp"

namespace febe {

// Gauss-Legendre rule with q points on [0,1], nodes ascending. Cached.
struct GaussRule1D {
  Eigen::VectorXd x, w;
};
const GaussRule1D& gauss01(int q);

// tensor product rule on [0,1]^2, q*q points (u fast, v slow)
struct TensorRule {
  Eigen::VectorXd u, v, w;
  int n() const { return (int)w.size(); }
};
const TensorRule& tensor01(int q);

// One quadrature point for a pair of parameter squares; (ax,ay) on the first
// element, (bx,by) on the second, in canonical alignment (see below).
struct PairPoint {
  double ax, ay, bx, by, w;
};

// Singularity-removing coordinate transforms for pairs of touching elements,
// streamed point by point. Canonical alignment of the emitted parameters:
//   Identical:    both factors share one frame.
//   CommonEdge:   shared edge is edge 0 of both squares in a frame where both
//                 traverse it in the same direction; callers restore native
//                 frames via square_corner_param, reversing the second
//                 square's edge coordinate (closed manifold orientation).
//   CommonVertex: shared vertex is corner 0 of both squares.
//   Disjoint:     plain tensor rule on each factor.
// Weights include all transform Jacobians and sum to 1 (the measure of
// [0,1]^4). No emitted point touches the singular set.
template <typename F>
void for_each_pair_point(PairCase kind, int q, F&& fn) {
  const GaussRule1D& g = gauss01(q);
  const double* x = g.x.data();
  const double* w = g.w.data();
  switch (kind) {
    case PairCase::Identical:
      for (int sq = 0; sq < 4; ++sq) {
        double e1 = sq & 1 ? -1.0 : 1.0, e2 = sq & 2 ? -1.0 : 1.0;
        for (int half = 0; half < 2; ++half)
          for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) {
              double W = x[i], X = x[j];
              double z1m = half == 0 ? W : W * X;
              double z2m = half == 0 ? W * X : W;
              double jac = W * (1 - z1m) * (1 - z2m) * w[i] * w[j];
              double b1 = e1 < 0 ? z1m : 0.0, b2 = e2 < 0 ? z2m : 0.0;
              for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l) {
                  double t1 = b1 + (1 - z1m) * x[k];
                  double t2 = b2 + (1 - z2m) * x[l];
                  fn(PairPoint{t1 + e1 * z1m, t2 + e2 * z2m, t1, t2,
                               jac * w[k] * w[l]});
                }
            }
      }
      break;
    case PairCase::CommonEdge:
      for (int sgn = 0; sgn < 2; ++sgn) {
        double e = sgn ? -1.0 : 1.0;
        for (int perm = 0; perm < 3; ++perm)
          for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j)
              for (int k = 0; k < q; ++k) {
                double W = x[i], p1 = W * x[j], p2 = W * x[k];
                double s2, t2, z1m;
                if (perm == 0) {
                  s2 = W; t2 = p1; z1m = p2;
                } else if (perm == 1) {
                  s2 = p1; t2 = W; z1m = p2;
                } else {
                  s2 = p1; t2 = p2; z1m = W;
                }
                double jac = W * W * (1 - z1m) * w[i] * w[j] * w[k];
                double b = e < 0 ? z1m : 0.0;
                for (int l = 0; l < q; ++l) {
                  double t1 = b + (1 - z1m) * x[l];
                  fn(PairPoint{t1 + e * z1m, s2, t1, t2, jac * w[l]});
                }
              }
      }
      break;
    case PairCase::CommonVertex:
      for (int perm = 0; perm < 4; ++perm)
        for (int i = 0; i < q; ++i)
          for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k)
              for (int l = 0; l < q; ++l) {
                double W = x[i];
                double r[3] = {W * x[j], W * x[k], W * x[l]};
                double c[4];
                int t = 0;
                for (int s = 0; s < 4; ++s) c[s] = s == perm ? W : r[t++];
                fn(PairPoint{c[0], c[1], c[2], c[3],
                             W * W * W * w[i] * w[j] * w[k] * w[l]});
              }
      break;
    case PairCase::Disjoint:
      for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j)
          for (int k = 0; k < q; ++k)
            for (int l = 0; l < q; ++l)
              fn(PairPoint{x[i], x[j], x[k], x[l], w[i] * w[j] * w[k] * w[l]});
      break;
  }
}

struct PairRule {
  std::vector<PairPoint> pts;
};

PairRule make_pair_rule(PairCase kind, int q);

// materialized and cached for small q; falls back to a thread-local
// scratch rule for large q to bound resident memory
const PairRule& pair_rule(PairCase kind, int q);

// Affine rotation of the unit square mapping the frame "corner c at the
// origin, ccw" back to native coordinates: (s,t) are coordinates in the
// rotated frame, result is the native parameter point.
inline void square_corner_param(int corner, double s, double t, double& x,
                                double& y) {
  switch (corner & 3) {
    case 0: x = s; y = t; break;
    case 1: x = 1 - t; y = s; break;
    case 2: x = 1 - s; y = 1 - t; break;
    default: x = t; y = 1 - s; break;
  }
}

}  // namespace febe
