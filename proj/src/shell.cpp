#include "febe/shell.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "febe/dual.hpp"
#include "febe/quadrature.hpp"

namespace febe {

namespace {

template <typename T>
void cross3(const T* a, const T* b, T* o) {
  o[0] = a[1] * b[2] - a[2] * b[1];
  o[1] = a[2] * b[0] - a[0] * b[2];
  o[2] = a[0] * b[1] - a[1] * b[0];
}

template <typename T>
T dot3(const T* a, const T* b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// generic driver: B jet blocks of 3 scalars each, density fn(qpoint, z)
template <int B, typename QPT, typename Fn>
void drive(const PatchSet& ps, const std::vector<std::vector<QPT>>& qps,
           const Coeffs& theta, const Fn& fn, double* val,
           Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  constexpr int NV = 3 * B;
  const QuadMesh& m = ps.mesh();
  if ((int)theta.rows() != m.num_vertices())
    throw Error("configuration does not match the control mesh");
  int n3 = 3 * m.num_vertices();
  if (val) *val = 0;
  if (grad) {
    grad->resize(n3);
    grad->setZero();
  }
  if (hess) {
    hess->resize(n3, n3);
    hess->setZero();
  }
  double zv[NV];
  Eigen::MatrixXd G;
  for (int f = 0; f < m.num_quads(); ++f) {
    const std::vector<int>& st = ps.patch(f).stencil;
    int K = (int)st.size();
    for (const QPT& q : qps[(size_t)f]) {
      for (int blk = 0; blk < B; ++blk)
        for (int i = 0; i < 3; ++i) {
          double s = 0;
          for (int a = 0; a < K; ++a) s += q.wr(blk, a) * theta(st[(size_t)a], i);
          zv[3 * blk + i] = s;
        }
      if (hess) {
        Dual2<NV> z[NV];
        for (int k = 0; k < NV; ++k) z[k] = Dual2<NV>::var(zv[k], k);
        Dual2<NV> d = fn(q, z);
        if (val) *val += q.wq * d.v;
        if (grad)
          for (int blk = 0; blk < B; ++blk)
            for (int i = 0; i < 3; ++i) {
              double gz = q.wq * d.g(3 * blk + i);
              for (int a = 0; a < K; ++a)
                (*grad)(3 * st[(size_t)a] + i) += gz * q.wr(blk, a);
            }
        Eigen::Matrix<double, B, B> hij;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            for (int b1 = 0; b1 < B; ++b1)
              for (int b2 = 0; b2 < B; ++b2) hij(b1, b2) = d.h(3 * b1 + i, 3 * b2 + j);
            G.noalias() = q.wr.transpose() * hij * q.wr;
            for (int a = 0; a < K; ++a)
              for (int b = 0; b < K; ++b)
                (*hess)(3 * st[(size_t)a] + i, 3 * st[(size_t)b] + j) +=
                    q.wq * G(a, b);
          }
      } else if (grad) {
        Dual1<NV> z[NV];
        for (int k = 0; k < NV; ++k) z[k] = Dual1<NV>::var(zv[k], k);
        Dual1<NV> d = fn(q, z);
        if (val) *val += q.wq * d.v;
        for (int blk = 0; blk < B; ++blk)
          for (int i = 0; i < 3; ++i) {
            double gz = q.wq * d.g(3 * blk + i);
            for (int a = 0; a < K; ++a)
              (*grad)(3 * st[(size_t)a] + i) += gz * q.wr(blk, a);
          }
      } else if (val) {
        *val += q.wq * fn(q, zv);
      }
    }
  }
}

struct ShellDensity {
  double nu, ef2;

  // z: [xu, xv, xuu, xuv, xvv], three scalars each
  template <typename QPT, typename T>
  T operator()(const QPT& q, const T* z) const {
    const T* xu = z;
    const T* xv = z + 3;
    const T* xuu = z + 6;
    const T* xuv = z + 9;
    const T* xvv = z + 12;

    T nt[3];
    cross3(xu, xv, nt);
    T inv = 1.0 / sqrt(dot3(nt, nt));
    T n[3] = {nt[0] * inv, nt[1] * inv, nt[2] * inv};

    T F[3][3];
    for (int mm = 0; mm < 3; ++mm)
      for (int i = 0; i < 3; ++i)
        F[mm][i] = xu[mm] * q.ct(i, 0) + xv[mm] * q.ct(i, 1);

    T eps[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        T s = F[0][i] * F[0][j] + F[1][i] * F[1][j] + F[2][i] * F[2][j];
        eps[i][j] = 0.5 * (q.proj(i, j) - s);
      }

    T d0t[3], d1t[3], tmp[3];
    cross3(xuu, xv, d0t);
    cross3(xu, xuv, tmp);
    for (int k = 0; k < 3; ++k) d0t[k] = d0t[k] + tmp[k];
    cross3(xuv, xv, d1t);
    cross3(xu, xvv, tmp);
    for (int k = 0; k < 3; ++k) d1t[k] = d1t[k] + tmp[k];
    T c0 = dot3(n, d0t), c1 = dot3(n, d1t);
    T nd0[3], nd1[3];
    for (int k = 0; k < 3; ++k) {
      nd0[k] = inv * (d0t[k] - n[k] * c0);
      nd1[k] = inv * (d1t[k] - n[k] * c1);
    }

    T kc[3][3];
    for (int mm = 0; mm < 3; ++mm)
      for (int j = 0; j < 3; ++j)
        kc[mm][j] = nd0[mm] * q.ct(j, 0) + nd1[mm] * q.ct(j, 1);
    T kap[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        T s = F[0][i] * kc[0][j] + F[1][i] * kc[1][j] + F[2][i] * kc[2][j];
        kap[i][j] = q.kref(i, j) - s;
      }

    T tre = eps[0][0] + eps[1][1] + eps[2][2];
    T trk = kap[0][0] + kap[1][1] + kap[2][2];
    T e2(0.0), e2t(0.0), k2(0.0), k2t(0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        e2 = e2 + eps[i][j] * eps[i][j];
        e2t = e2t + eps[i][j] * eps[j][i];
        k2 = k2 + kap[i][j] * kap[i][j];
        k2t = k2t + kap[i][j] * kap[j][i];
      }
    T mem = nu * (tre * tre) + 0.5 * (1 - nu) * (e2 + e2t);
    T ben = nu * (trk * trk) + 0.5 * (1 - nu) * (k2 + k2t);
    return 0.5 * (mem + ef2 * ben);
  }
};

struct VolumeDensity {
  // z: [x, xu, xv]
  template <typename QPT, typename T>
  T operator()(const QPT&, const T* z) const {
    const T* x = z;
    const T* xu = z + 3;
    const T* xv = z + 6;
    T nt[3];
    cross3(xu, xv, nt);
    return (x[0] * nt[0] + x[1] * nt[1] + x[2] * nt[2]) / 3.0;
  }
};

}  // namespace

ShellEnergy::ShellEnergy(const PatchSet& ps, const ShellParams& prm, int order)
    : ps_(ps), prm_(prm) {
  if (order < 1) throw Error("quadrature order must be positive");
  const QuadMesh& m = ps.mesh();
  const TensorRule& tr = tensor01(order);
  qp_.resize((size_t)m.num_quads());
  BasisValues b;
  for (int f = 0; f < m.num_quads(); ++f) {
    const SubdivisionPatch& p = ps.patch(f);
    qp_[(size_t)f].reserve((size_t)tr.n());
    for (int t = 0; t < tr.n(); ++t) {
      double u = tr.u(t), v = tr.v(t);
      ps.basis(p, u, v, 2, b);
      QPoint q;
      q.wr = b.w.bottomRows<5>();
      Jet2 jr = ps.evaluate(p, ps.reference(), u, v, 2);
      Eigen::Matrix<double, 3, 2> tbar;
      tbar.col(0) = jr.xu;
      tbar.col(1) = jr.xv;
      Eigen::Matrix2d g = tbar.transpose() * tbar;
      double det = g.determinant();
      if (!(det > 0)) throw Error("degenerate reference metric");
      Eigen::Matrix2d ginv;
      ginv << g(1, 1), -g(0, 1), -g(0, 1), g(0, 0);
      ginv /= det;
      q.ct = tbar * ginv;
      q.proj = q.ct * tbar.transpose();
      q.wq = tr.w(t) * std::sqrt(det);
      Vec3 nt = jr.xu.cross(jr.xv);
      double inv = 1.0 / nt.norm();
      Vec3 n = nt * inv;
      Vec3 d0t = jr.xuu.cross(jr.xv) + jr.xu.cross(jr.xuv);
      Vec3 d1t = jr.xuv.cross(jr.xv) + jr.xu.cross(jr.xvv);
      Vec3 nd0 = inv * (d0t - n * n.dot(d0t));
      Vec3 nd1 = inv * (d1t - n * n.dot(d1t));
      Eigen::Matrix3d kbar = nd0 * q.ct.col(0).transpose() + nd1 * q.ct.col(1).transpose();
      q.kref = q.proj * kbar;
      qp_[(size_t)f].push_back(std::move(q));
    }
  }
}

double ShellEnergy::value(const Coeffs& theta) const {
  double w = 0;
  assemble(theta, &w, nullptr, nullptr);
  return w;
}

void ShellEnergy::assemble(const Coeffs& theta, double* energy,
                           Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
  ShellDensity fn{prm_.nu, prm_.thickness * prm_.thickness};
  drive<5>(ps_, qp_, theta, fn, energy, grad, hess);
}

VolumeFunctional::VolumeFunctional(const PatchSet& ps, int order) : ps_(ps) {
  if (order < 1) throw Error("quadrature order must be positive");
  const QuadMesh& m = ps.mesh();
  const TensorRule& tr = tensor01(order);
  qp_.resize((size_t)m.num_quads());
  BasisValues b;
  for (int f = 0; f < m.num_quads(); ++f) {
    const SubdivisionPatch& p = ps.patch(f);
    qp_[(size_t)f].reserve((size_t)tr.n());
    for (int t = 0; t < tr.n(); ++t) {
      ps.basis(p, tr.u(t), tr.v(t), 1, b);
      QPoint q;
      q.wr = b.w.topRows<3>();
      q.wq = tr.w(t);
      qp_[(size_t)f].push_back(std::move(q));
    }
  }
}

double VolumeFunctional::value(const Coeffs& theta) const {
  double v = 0;
  assemble(theta, &v, nullptr, nullptr);
  return v;
}

void VolumeFunctional::assemble(const Coeffs& theta, double* vol,
                                Eigen::VectorXd* grad,
                                Eigen::MatrixXd* hess) const {
  drive<3>(ps_, qp_, theta, VolumeDensity{}, vol, grad, hess);
}

}  // namespace febe
