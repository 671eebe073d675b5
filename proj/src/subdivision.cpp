#include "febe/subdivision.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>

#include <Eigen/Geometry>

#include "febe/quadrature.hpp"

namespace febe {

namespace {

int slot_of(const QuadMesh& m, int f, int v) {
  for (int k = 0; k < 4; ++k)
    if (m.corner(f, k) == v) return k;
  throw Error("internal: vertex not found in face");
}

int after(const QuadMesh& m, int f, int v) {
  return m.corner(f, slot_of(m, f, v) + 1);
}

// corners of the face across directed edge (a,b) of f; pa adjacent to a
struct Far {
  int face, pa, pb;
};

Far far_corners(const QuadMesh& m, int f, int a, int b) {
  int e = m.edge_between(a, b);
  if (e < 0) throw Error("internal: expected edge is missing");
  const MeshEdge& ed = m.edges()[(size_t)e];
  int g = ed.face[0] == f ? ed.face[1] : ed.face[0];
  int pa = after(m, g, a);
  int pb = after(m, g, pa);
  return {g, pa, pb};
}

// vertex diagonally across the quad that touches corner c of f only at c
int diag_opposite(const QuadMesh& m, int f, int c) {
  std::vector<int> fan = m.fan_from(c, f);
  int d = fan[2];
  return m.corner(d, slot_of(m, d, c) + 2);
}

void cubic_basis(double t, double* b, double* d1, double* d2) {
  double s = 1 - t;
  b[0] = s * s * s / 6.0;
  b[1] = (3 * t * t * t - 6 * t * t + 4) / 6.0;
  b[2] = (-3 * t * t * t + 3 * t * t + 3 * t + 1) / 6.0;
  b[3] = t * t * t / 6.0;
  d1[0] = -s * s / 2.0;
  d1[1] = (3 * t * t - 4 * t) / 2.0;
  d1[2] = (-3 * t * t + 2 * t + 1) / 2.0;
  d1[3] = t * t / 2.0;
  d2[0] = s;
  d2[1] = 3 * t - 2;
  d2[2] = 1 - 3 * t;
  d2[3] = t;
}

// 16 uniform bicubic weights in grid order (index 4*j+i, i along u)
template <typename Mat>
void fill16(double u, double v, int order, Mat& W) {
  double bu[4], du[4], su[4], bv[4], dv[4], sv[4];
  cubic_basis(u, bu, du, su);
  cubic_basis(v, bv, dv, sv);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      int a = 4 * j + i;
      W(0, a) = bu[i] * bv[j];
      if (order >= 1) {
        W(1, a) = du[i] * bv[j];
        W(2, a) = bu[i] * dv[j];
      }
      if (order >= 2) {
        W(3, a) = su[i] * bv[j];
        W(4, a) = du[i] * dv[j];
        W(5, a) = bu[i] * sv[j];
      }
    }
}

// same weights written as contiguous 16-entry columns (batch layout)
void fill16_cols(double u, double v, int order, double* w0, double* w1,
                 double* w2) {
  double bu[4], du[4], su[4], bv[4], dv[4], sv[4];
  cubic_basis(u, bu, du, su);
  cubic_basis(v, bv, dv, sv);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      int a = 4 * j + i;
      w0[a] = bu[i] * bv[j];
      if (order >= 1) {
        w1[a] = du[i] * bv[j];
        w2[a] = bu[i] * dv[j];
      }
    }
}

// Catmull-Clark refinement expressed over the canonical EV stencil ordering.
// Index space: 0 = EV; 1+2j / 2+2j = edge / diagonal neighbor of fan face j;
// 2N+1 .. 2N+7 = q0..q6 completing the 4x4 grid around fan face 0.
struct Canonical {
  int N = 0, K = 0;
  Eigen::MatrixXd A;                     // ring -> ring refinement
  std::array<Eigen::MatrixXd, 3> tileB;  // 16 x K extraction per sub-tile
};

Canonical build_canonical(int N) {
  if (N < 3) throw Error("valence must be at least 3");
  const int K = 2 * N + 8;
  auto E = [&](int j) { return 1 + 2 * ((j % N + N) % N); };
  auto D = [&](int j) { return 2 + 2 * ((j % N + N) % N); };
  auto Q = [&](int i) { return 2 * N + 1 + i; };
  auto unit = [&](int i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(K);
    r(i) = 1.0;
    return r;
  };

  std::vector<Eigen::VectorXd> fpF(N);
  for (int j = 0; j < N; ++j)
    fpF[j] = (unit(0) + unit(E(j)) + unit(D(j)) + unit(E(j + 1))) / 4.0;
  Eigen::VectorXd fpA = (unit(D(N - 1)) + unit(Q(0)) + unit(Q(1)) + unit(E(0))) / 4.0;
  Eigen::VectorXd fpB = (unit(E(0)) + unit(Q(1)) + unit(Q(2)) + unit(D(0))) / 4.0;
  Eigen::VectorXd fpC = (unit(D(0)) + unit(Q(2)) + unit(Q(3)) + unit(Q(4))) / 4.0;
  Eigen::VectorXd fpD = (unit(E(1)) + unit(D(0)) + unit(Q(4)) + unit(Q(5))) / 4.0;
  Eigen::VectorXd fpE = (unit(D(1)) + unit(E(1)) + unit(Q(5)) + unit(Q(6))) / 4.0;

  std::vector<Eigen::VectorXd> epv0(N);
  for (int j = 0; j < N; ++j)
    epv0[j] = (unit(0) + unit(E(j)) + fpF[(size_t)j] + fpF[(size_t)((j + N - 1) % N)]) / 4.0;
  Eigen::VectorXd epE0Dm1 = (unit(E(0)) + unit(D(N - 1)) + fpF[(size_t)(N - 1)] + fpA) / 4.0;
  Eigen::VectorXd epE0D0 = (unit(E(0)) + unit(D(0)) + fpF[0] + fpB) / 4.0;
  Eigen::VectorXd epD0E1 = (unit(D(0)) + unit(E(1)) + fpF[0] + fpD) / 4.0;
  Eigen::VectorXd epE1D1 = (unit(E(1)) + unit(D(1)) + fpF[1] + fpE) / 4.0;
  Eigen::VectorXd epE0q1 = (unit(E(0)) + unit(Q(1)) + fpA + fpB) / 4.0;
  Eigen::VectorXd epD0q2 = (unit(D(0)) + unit(Q(2)) + fpB + fpC) / 4.0;
  Eigen::VectorXd epD0q4 = (unit(D(0)) + unit(Q(4)) + fpC + fpD) / 4.0;
  Eigen::VectorXd epE1q5 = (unit(E(1)) + unit(Q(5)) + fpD + fpE) / 4.0;

  Eigen::VectorXd vpv0 = (double(N) - 2.0) / N * unit(0);
  for (int j = 0; j < N; ++j) vpv0 += (unit(E(j)) + fpF[(size_t)j]) / double(N * N);
  Eigen::VectorXd vpE0 = 0.5 * unit(E(0)) +
                         (unit(0) + unit(D(N - 1)) + unit(Q(1)) + unit(D(0))) / 16.0 +
                         (fpF[0] + fpF[(size_t)(N - 1)] + fpA + fpB) / 16.0;
  Eigen::VectorXd vpD0 = 0.5 * unit(D(0)) +
                         (unit(E(0)) + unit(Q(2)) + unit(Q(4)) + unit(E(1))) / 16.0 +
                         (fpF[0] + fpB + fpC + fpD) / 16.0;
  Eigen::VectorXd vpE1 = 0.5 * unit(E(1)) +
                         (unit(0) + unit(D(0)) + unit(Q(5)) + unit(D(1))) / 16.0 +
                         (fpF[0] + fpF[1] + fpD + fpE) / 16.0;

  Canonical c;
  c.N = N;
  c.K = K;
  c.A.resize(K, K);
  c.A.row(0) = vpv0.transpose();
  for (int j = 0; j < N; ++j) {
    c.A.row(E(j)) = epv0[(size_t)j].transpose();
    c.A.row(D(j)) = fpF[(size_t)j].transpose();
  }
  c.A.row(Q(0)) = epE0Dm1.transpose();
  c.A.row(Q(1)) = vpE0.transpose();
  c.A.row(Q(2)) = epE0D0.transpose();
  c.A.row(Q(3)) = vpD0.transpose();
  c.A.row(Q(4)) = epD0E1.transpose();
  c.A.row(Q(5)) = vpE1.transpose();
  c.A.row(Q(6)) = epE1D1.transpose();

  // control points of the refined mesh on the 6x6 grid around fan face 0
  // (u index a, v index b; the refined EV sits at (2,2))
  auto fine = [&](int a, int b) -> const Eigen::VectorXd& {
    switch (b * 8 + a) {
      case 1 * 8 + 2: return epv0[(size_t)(N - 1)];
      case 1 * 8 + 3: return fpF[(size_t)(N - 1)];
      case 1 * 8 + 4: return epE0Dm1;
      case 1 * 8 + 5: return fpA;
      case 2 * 8 + 1: return epv0[(size_t)(2 % N)];
      case 2 * 8 + 2: return vpv0;
      case 2 * 8 + 3: return epv0[0];
      case 2 * 8 + 4: return vpE0;
      case 2 * 8 + 5: return epE0q1;
      case 3 * 8 + 1: return fpF[1];
      case 3 * 8 + 2: return epv0[1];
      case 3 * 8 + 3: return fpF[0];
      case 3 * 8 + 4: return epE0D0;
      case 3 * 8 + 5: return fpB;
      case 4 * 8 + 1: return epE1D1;
      case 4 * 8 + 2: return vpE1;
      case 4 * 8 + 3: return epD0E1;
      case 4 * 8 + 4: return vpD0;
      case 4 * 8 + 5: return epD0q2;
      case 5 * 8 + 1: return fpE;
      case 5 * 8 + 2: return epE1q5;
      case 5 * 8 + 3: return fpD;
      case 5 * 8 + 4: return epD0q4;
      case 5 * 8 + 5: return fpC;
      default: throw Error("internal: fine grid slot out of range");
    }
  };

  for (int k = 0; k < 3; ++k) c.tileB[(size_t)k].resize(16, K);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      c.tileB[0].row(4 * j + i) = fine(2 + i, 1 + j).transpose();
      c.tileB[1].row(4 * j + i) = fine(2 + i, 2 + j).transpose();
      c.tileB[2].row(4 * j + i) = fine(1 + i, 2 + j).transpose();
    }
  return c;
}

}  // namespace

SubdivisionMatrix PatchSet::subdivision_matrix(int valence) {
  Canonical c = build_canonical(valence);
  return {valence, std::move(c.A)};
}

namespace {

struct EvTablesImpl {
  Eigen::MatrixXd A;
  Eigen::VectorXd limit;
  std::vector<std::array<Eigen::MatrixXd, 3>> tile;
};

EvTablesImpl make_tables(int N, int max_level) {
  Canonical c = build_canonical(N);
  EvTablesImpl t;
  t.A = c.A;
  t.tile.resize((size_t)max_level);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(c.K, c.K);
  for (int l = 1; l <= max_level; ++l) {
    for (int k = 0; k < 3; ++k)
      t.tile[(size_t)(l - 1)][(size_t)k].noalias() = c.tileB[(size_t)k] * P;
    P = c.A * P;
  }
  Eigen::MatrixXd Pow = c.A;
  for (int i = 0; i < 8; ++i) Pow = Pow * Pow;  // A^256: fully contracted ring
  t.limit = Pow.row(0).transpose();
  t.limit /= t.limit.sum();
  return t;
}

// virtual-refinement cell containing (u,v): depth, sub-tile, tile coordinates
struct CellRef {
  int level = 1;
  int tile = 0;
  double u = 0, v = 0;
};

CellRef locate_cell(double u, double v, int max_level) {
  double m = std::max(u, v);
  int n = (int)std::ceil(-std::log2(m) - 1e-12);
  n = std::clamp(n, 1, max_level);
  double ub = std::ldexp(u, n), vb = std::ldexp(v, n);
  while (std::max(ub, vb) < 1.0) {  // only when clamped at max_level
    ub *= 2;
    vb *= 2;
  }
  CellRef c;
  c.level = n;
  if (vb < 1.0) {
    c.tile = 0;
    c.u = ub - 1;
    c.v = vb;
  } else if (ub < 1.0) {
    c.tile = 2;
    c.u = ub;
    c.v = vb - 1;
  } else {
    c.tile = 1;
    c.u = ub - 1;
    c.v = vb - 1;
  }
  return c;
}

template <typename Tables>
void ev_basis_eval(const Tables& T, int K, double u, double v, int order,
                   Eigen::Matrix<double, 6, Eigen::Dynamic>& w, int max_level) {
  if (u == 0.0 && v == 0.0) {
    if (order > 0)
      throw Error("derivatives requested exactly at an extraordinary corner");
    w.row(0) = T.limit.transpose();
    return;
  }
  CellRef cell = locate_cell(u, v, max_level);
  Eigen::Matrix<double, 6, 16> W16;
  fill16(cell.u, cell.v, order, W16);
  const Eigen::MatrixXd& C = T.tile[(size_t)(cell.level - 1)][(size_t)cell.tile];
  int rows = order == 0 ? 1 : order == 1 ? 3 : 6;
  w.topRows(rows).noalias() = W16.topRows(rows) * C;
  (void)K;
  if (order >= 1) {
    double s1 = std::ldexp(1.0, cell.level);
    w.row(1) *= s1;
    w.row(2) *= s1;
  }
  if (order >= 2) {
    double s2 = std::ldexp(1.0, 2 * cell.level);
    w.row(3) *= s2;
    w.row(4) *= s2;
    w.row(5) *= s2;
  }
}

}  // namespace

void PatchSet::canonical_ev_basis(int valence, double u, double v, int order,
                                  BasisValues& out) {
  static std::mutex mu;
  static std::map<int, EvTablesImpl> cache;
  const EvTablesImpl* T;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(valence);
    if (it == cache.end())
      it = cache.emplace(valence, make_tables(valence, max_level)).first;
    T = &it->second;
  }
  int K = 2 * valence + 8;
  out.order = order;
  if ((int)out.w.cols() != K) out.w.resize(6, K);
  ev_basis_eval(*T, K, u, v, order, out.w, max_level);
}

PatchSet PatchSet::build(QuadMesh mesh) {
  PatchSet ps;
  ps.mesh_ = std::move(mesh);
  auto isolated = [](const QuadMesh& m) {
    for (int f = 0; f < m.num_quads(); ++f) {
      int evs = 0;
      for (int k = 0; k < 4; ++k)
        if (m.valence(m.corner(f, k)) != 4) ++evs;
      if (evs > 1) return false;
    }
    return true;
  };
  if (!isolated(ps.mesh_)) {
    ps.mesh_ = ps.mesh_.subdivided();
    ps.refined_ = true;
    if (!isolated(ps.mesh_))
      throw Error("internal: refinement failed to isolate extraordinary vertices");
  }
  const QuadMesh& m = ps.mesh_;
  ps.reference_.resize(m.num_vertices(), 3);
  for (int v = 0; v < m.num_vertices(); ++v) ps.reference_.row(v) = m.position(v);
  ps.patch_.resize((size_t)m.num_quads());
  for (int f = 0; f < m.num_quads(); ++f) ps.build_patch(f);
  for (const SubdivisionPatch& p : ps.patch_)
    if (p.extraordinary && !ps.ev_.count(p.valence)) {
      EvTablesImpl t = make_tables(p.valence, max_level);
      EvTables dst;
      dst.A = std::move(t.A);
      dst.limit = std::move(t.limit);
      dst.tile = std::move(t.tile);
      ps.ev_.emplace(p.valence, std::move(dst));
    }
  return ps;
}

void PatchSet::build_patch(int f) {
  const QuadMesh& m = mesh_;
  SubdivisionPatch p;
  p.face = f;
  int ev = -1;
  for (int k = 0; k < 4; ++k) {
    int v = m.corner(f, k);
    if (m.valence(v) != 4) {
      if (ev >= 0) throw Error("internal: face touches two extraordinary vertices");
      ev = k;
    }
  }
  if (ev < 0) {
    p.rot = 0;
    p.extraordinary = false;
    p.valence = 4;
    int c[4];
    for (int k = 0; k < 4; ++k) c[k] = m.corner(f, k);
    int G[4][4];
    G[1][1] = c[0];
    G[2][1] = c[1];
    G[2][2] = c[2];
    G[1][2] = c[3];
    Far fb = far_corners(m, f, c[0], c[1]);
    G[1][0] = fb.pa;
    G[2][0] = fb.pb;
    Far fr = far_corners(m, f, c[1], c[2]);
    G[3][1] = fr.pa;
    G[3][2] = fr.pb;
    Far ft = far_corners(m, f, c[2], c[3]);
    G[2][3] = ft.pa;
    G[1][3] = ft.pb;
    Far fl = far_corners(m, f, c[3], c[0]);
    G[0][2] = fl.pa;
    G[0][1] = fl.pb;
    G[0][0] = diag_opposite(m, f, c[0]);
    G[3][0] = diag_opposite(m, f, c[1]);
    G[3][3] = diag_opposite(m, f, c[2]);
    G[0][3] = diag_opposite(m, f, c[3]);
    p.stencil.resize(16);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) p.stencil[(size_t)(4 * j + i)] = G[i][j];
  } else {
    int v0 = m.corner(f, ev);
    int N = m.valence(v0);
    p.rot = ev;
    p.extraordinary = true;
    p.valence = N;
    std::vector<int> fan = m.fan_from(v0, f);
    std::vector<int> E((size_t)N), D((size_t)N);
    for (int j = 0; j < N; ++j) {
      E[(size_t)j] = after(m, fan[(size_t)j], v0);
      D[(size_t)j] = after(m, fan[(size_t)j], E[(size_t)j]);
    }
    for (int j = 0; j < N; ++j)
      if (after(m, fan[(size_t)j], D[(size_t)j]) != E[(size_t)((j + 1) % N)])
        throw Error("internal: inconsistent one-ring traversal");
    for (int j = 0; j < N; ++j)
      if (m.valence(E[(size_t)j]) != 4 || m.valence(D[(size_t)j]) != 4)
        throw Error("internal: one-ring of an extraordinary vertex is not regular");
    Far oa = far_corners(m, fan[(size_t)(N - 1)], D[(size_t)(N - 1)], E[0]);
    int q0 = oa.pa, q1 = oa.pb;
    Far ob = far_corners(m, f, E[0], D[0]);
    if (ob.pa != q1) throw Error("internal: inconsistent outer ring (q1)");
    int q2 = ob.pb;
    int q3 = diag_opposite(m, f, D[0]);
    Far od = far_corners(m, f, D[0], E[1]);
    int q4 = od.pa, q5 = od.pb;
    Far oe = far_corners(m, fan[1], E[1], D[1]);
    if (oe.pa != q5) throw Error("internal: inconsistent outer ring (q5)");
    int q6 = oe.pb;
    p.stencil.resize((size_t)(2 * N + 8));
    p.stencil[0] = v0;
    for (int j = 0; j < N; ++j) {
      p.stencil[(size_t)(1 + 2 * j)] = E[(size_t)j];
      p.stencil[(size_t)(2 + 2 * j)] = D[(size_t)j];
    }
    int q[7] = {q0, q1, q2, q3, q4, q5, q6};
    for (int i = 0; i < 7; ++i) p.stencil[(size_t)(2 * N + 1 + i)] = q[i];
  }
  patch_[(size_t)f] = std::move(p);
}

const PatchSet::EvTables& PatchSet::tables(int valence) const {
  auto it = ev_.find(valence);
  if (it == ev_.end()) throw Error("internal: missing subdivision tables");
  return it->second;
}

void PatchSet::basis(const SubdivisionPatch& p, double u, double v, int order,
                     BasisValues& out) const {
  if (order < 0 || order > 2) throw Error("basis order must be 0, 1 or 2");
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0))
    throw Error("parameter outside the unit square");
  int K = (int)p.stencil.size();
  out.order = order;
  if ((int)out.w.cols() != K) out.w.resize(6, K);
  if (!p.extraordinary) {
    fill16(u, v, order, out.w);
    return;
  }
  ev_basis_eval(tables(p.valence), K, u, v, order, out.w, max_level);
}

void PatchSet::basis_batch(const SubdivisionPatch& p, const double* u,
                           const double* v, int n, int order,
                           Eigen::MatrixXd& val, Eigen::MatrixXd& du,
                           Eigen::MatrixXd& dv) const {
  if (order < 0 || order > 1) throw Error("batched basis order must be 0 or 1");
  int K = (int)p.stencil.size();
  val.resize(K, n);
  if (order >= 1) {
    du.resize(K, n);
    dv.resize(K, n);
  }
  for (int t = 0; t < n; ++t)
    if (!(u[t] >= 0.0 && u[t] <= 1.0 && v[t] >= 0.0 && v[t] <= 1.0))
      throw Error("parameter outside the unit square");
  double sink[32];
  if (!p.extraordinary) {
    for (int t = 0; t < n; ++t)
      fill16_cols(u[t], v[t], order, val.col(t).data(),
                  order >= 1 ? du.col(t).data() : sink,
                  order >= 1 ? dv.col(t).data() : sink);
    return;
  }
  const EvTables& T = tables(p.valence);
  // group points by virtual-refinement cell (counting sort on the cell key);
  // each group collapses into one dense product with the cached tile operator
  std::vector<CellRef> cell((size_t)n);
  std::vector<int> key((size_t)n);
  int nkeys = 3 * max_level;
  std::vector<int> start((size_t)nkeys + 1, 0);
  for (int t = 0; t < n; ++t) {
    if (u[t] == 0.0 && v[t] == 0.0) {
      if (order > 0)
        throw Error("derivatives requested exactly at an extraordinary corner");
      val.col(t) = T.limit;
      key[(size_t)t] = -1;
      continue;
    }
    const CellRef c = cell[(size_t)t] = locate_cell(u[t], v[t], max_level);
    key[(size_t)t] = 3 * (c.level - 1) + c.tile;
    ++start[(size_t)(key[(size_t)t] + 1)];
  }
  for (int k = 0; k < nkeys; ++k) start[(size_t)(k + 1)] += start[(size_t)k];
  std::vector<int> ord(start[(size_t)nkeys]);
  {
    std::vector<int> at(start.begin(), start.end() - 1);
    for (int t = 0; t < n; ++t)
      if (key[(size_t)t] >= 0) ord[(size_t)at[(size_t)key[(size_t)t]]++] = t;
  }
  Eigen::MatrixXd B[3], R;
  int rows = order == 0 ? 1 : 3;
  for (int k = 0; k < nkeys; ++k) {
    int lo = start[(size_t)k], m = start[(size_t)(k + 1)] - lo;
    if (m == 0) continue;
    const int* idx = ord.data() + lo;
    const Eigen::MatrixXd& C = T.tile[(size_t)(k / 3)][(size_t)(k % 3)];
    for (int r = 0; r < rows; ++r) B[r].resize(16, m);
    for (int j = 0; j < m; ++j) {
      const CellRef& c = cell[(size_t)idx[j]];
      fill16_cols(c.u, c.v, order, B[0].col(j).data(),
                  order >= 1 ? B[1].col(j).data() : sink,
                  order >= 1 ? B[2].col(j).data() : sink);
    }
    R.noalias() = C.transpose() * B[0];
    for (int j = 0; j < m; ++j) val.col(idx[j]) = R.col(j);
    if (order >= 1) {
      double s1 = std::ldexp(1.0, k / 3 + 1);
      R.noalias() = (s1 * C.transpose()) * B[1];
      for (int j = 0; j < m; ++j) du.col(idx[j]) = R.col(j);
      R.noalias() = (s1 * C.transpose()) * B[2];
      for (int j = 0; j < m; ++j) dv.col(idx[j]) = R.col(j);
    }
  }
}

Jet2 PatchSet::evaluate(const SubdivisionPatch& p, const Coeffs& C, double u,
                        double v, int order) const {
  if ((int)C.rows() != mesh_.num_vertices())
    throw Error("coefficient array does not match the control mesh");
  thread_local BasisValues b;
  basis(p, u, v, order, b);
  Jet2 out;
  int K = (int)p.stencil.size();
  for (int a = 0; a < K; ++a) {
    Vec3 row = C.row(p.stencil[(size_t)a]).transpose();
    out.x += b.w(0, a) * row;
    if (order >= 1) {
      out.xu += b.w(1, a) * row;
      out.xv += b.w(2, a) * row;
    }
    if (order >= 2) {
      out.xuu += b.w(3, a) * row;
      out.xuv += b.w(4, a) * row;
      out.xvv += b.w(5, a) * row;
    }
  }
  return out;
}

double PatchSet::surface_jacobian(const SubdivisionPatch& p, const Coeffs& current,
                                  double u, double v) const {
  Jet2 ref = evaluate(p, reference_, u, v, 1);
  Jet2 cur = evaluate(p, current, u, v, 1);
  double a0 = ref.xu.cross(ref.xv).norm();
  if (!(a0 > 0.0)) throw Error("degenerate reference area element");
  return cur.xu.cross(cur.xv).norm() / a0;
}

Eigen::VectorXd PatchSet::corner_limit_weights(const SubdivisionPatch& p) const {
  BasisValues b;
  basis(p, 0.0, 0.0, 0, b);
  return b.w.row(0).transpose();
}

void PatchSet::dump_basis(const std::string& path, int face,
                          const std::vector<std::pair<double, double>>& uv,
                          int order) const {
  const SubdivisionPatch& p = patch(face);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  int rows = order == 0 ? 1 : order == 1 ? 3 : 6;
  int64_t header[4] = {(int64_t)face, (int64_t)order, (int64_t)uv.size(),
                       (int64_t)p.stencil.size()};
  out.write((const char*)header, sizeof header);
  BasisValues b;
  for (auto [u, v] : uv) {
    basis(p, u, v, order, b);
    double par[2] = {u, v};
    out.write((const char*)par, sizeof par);
    for (int r = 0; r < rows; ++r)
      for (int a = 0; a < (int)p.stencil.size(); ++a) {
        double w = b.w(r, a);
        out.write((const char*)&w, sizeof w);
      }
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

int required_levels(int q, int valence) {
  if (q < 1) throw Error("quadrature order must be positive");
  if (valence < 3) throw Error("valence must be at least 3");
  const GaussRule1D& g = gauss01(q);
  double xmin = g.x(0);
  int l = 1;
  while (xmin < std::ldexp(1.0, -l)) ++l;
  return l;
}

}  // namespace febe
