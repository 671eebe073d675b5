#include "febe/stokes.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

namespace febe {

namespace {

constexpr int kSmoothOrder = 6;  // mass / constraint integrals

struct BatchEval {
  Eigen::MatrixXd phi;      // K x n
  Eigen::Matrix3Xd pos;     // 3 x n
  Eigen::Matrix3Xd crossv;  // 3 x n, current area vector
};

void eval_batch(const PatchSet& ps, const SubdivisionPatch& p, const Coeffs& C,
                const double* us, const double* vs, int n, BatchEval& out) {
  int K = (int)p.stencil.size();
  thread_local Eigen::MatrixXd du, dv;
  ps.basis_batch(p, us, vs, n, 1, out.phi, du, dv);
  Eigen::Matrix<double, 3, Eigen::Dynamic> G(3, K);
  for (int a = 0; a < K; ++a) G.col(a) = C.row(p.stencil[(size_t)a]).transpose();
  out.pos.noalias() = G * out.phi;
  thread_local Eigen::Matrix3Xd xu, xv;
  xu.noalias() = G * du;
  xv.noalias() = G * dv;
  out.crossv.resize(3, n);
  out.crossv.row(0) =
      xu.row(1).cwiseProduct(xv.row(2)) - xu.row(2).cwiseProduct(xv.row(1));
  out.crossv.row(1) =
      xu.row(2).cwiseProduct(xv.row(0)) - xu.row(0).cwiseProduct(xv.row(2));
  out.crossv.row(2) =
      xu.row(0).cwiseProduct(xv.row(1)) - xu.row(1).cwiseProduct(xv.row(0));
}

// per-element tensor-rule tables for well-separated pairs
struct ElemTab {
  Eigen::MatrixXd phiw;  // K x n, basis * (rule weight * |cross|)
  Eigen::Matrix3Xd pos;
  Eigen::Matrix3Xd nrm;  // unit normals
};

using TabCache = std::vector<std::map<int, ElemTab>>;

const ElemTab& elem_table(TabCache& cache, const PatchSet& ps, const Coeffs& C,
                          int f, int q) {
  auto& slot = cache[(size_t)f];
  auto it = slot.find(q);
  if (it != slot.end()) return it->second;
  const TensorRule& tr = tensor01(q);
  BatchEval be;
  eval_batch(ps, ps.patch(f), C, tr.u.data(), tr.v.data(), tr.n(), be);
  ElemTab tab;
  tab.pos = be.pos;
  tab.nrm.resize(3, tr.n());
  tab.phiw = be.phi;
  for (int t = 0; t < tr.n(); ++t) {
    double J = be.crossv.col(t).norm();
    if (!(J > 0)) throw Error("degenerate area element in quadrature table");
    tab.nrm.col(t) = be.crossv.col(t) / J;
    tab.phiw.col(t) *= J * tr.w(t);
  }
  return slot.emplace(q, std::move(tab)).first->second;
}

// The 3x3 component blocks of every kernel here are symmetric in (i, j), so
// only the upper triangle is assembled; the rest is mirrored. `kba` marks
// whether the swapped-observation blocks are present (distinct faces only).
struct PairBlocks {
  std::array<Eigen::MatrixXd, 9> V;
  std::array<Eigen::MatrixXd, 9> Kab, Kba;  // x on a / x on b
  bool kba = false;

  double diff_v(const PairBlocks& o) const {
    double d = 0;
    for (int c = 0; c < 9; ++c)
      d = std::max(d, (V[(size_t)c] - o.V[(size_t)c]).cwiseAbs().maxCoeff());
    return d;
  }
  double diff_k(const PairBlocks& o) const {
    double d = 0;
    for (int c = 0; c < 9; ++c) {
      d = std::max(d, (Kab[(size_t)c] - o.Kab[(size_t)c]).cwiseAbs().maxCoeff());
      if (kba)
        d = std::max(d, (Kba[(size_t)c] - o.Kba[(size_t)c]).cwiseAbs().maxCoeff());
    }
    return d;
  }
};

constexpr double kC1 = 1.0 / (8.0 * std::numbers::pi);
constexpr double kC3 = 3.0 / (4.0 * std::numbers::pi);

constexpr int kUpperI[6] = {0, 0, 0, 1, 1, 2};
constexpr int kUpperJ[6] = {0, 1, 2, 1, 2, 2};

template <typename Blocks>
void mirror_lower(Blocks& B) {
  B[3] = B[1];
  B[6] = B[2];
  B[7] = B[5];
}

void disjoint_blocks(const ElemTab& ta, const ElemTab& tb, bool want_v,
                     bool want_k, PairBlocks& out) {
  int na = (int)ta.pos.cols(), nb = (int)tb.pos.cols();
  Eigen::MatrixXd G, Tab_, Tba;
  if (want_v) G.resize(na, 6 * nb);
  if (want_k) {
    Tab_.resize(na, 6 * nb);
    Tba.resize(na, 6 * nb);
  }
  for (int t = 0; t < nb; ++t) {
    Vec3 yb = tb.pos.col(t);
    Vec3 nyb = tb.nrm.col(t);
    for (int s = 0; s < na; ++s) {
      Vec3 r = ta.pos.col(s) - yb;
      double R2 = r.squaredNorm();
      double R = std::sqrt(R2);
      if (!(R > 0)) throw Error("coincident quadrature points between elements");
      double iR = 1.0 / R, iR3 = iR / R2;
      double fab = 0, fba = 0;
      if (want_k) {
        double iR5 = iR3 / R2;
        fab = kC3 * r.dot(nyb) * iR5;
        fba = kC3 * (-r.dot(ta.nrm.col(s))) * iR5;
      }
      for (int c = 0; c < 6; ++c) {
        int i = kUpperI[c], j = kUpperJ[c];
        double rij = r(i) * r(j);
        if (want_v)
          G(s, c * nb + t) = kC1 * ((i == j ? iR : 0.0) + rij * iR3);
        if (want_k) {
          Tab_(s, c * nb + t) = fab * rij;
          Tba(s, c * nb + t) = fba * rij;
        }
      }
    }
  }
  out.kba = want_k;
  Eigen::MatrixXd W;
  if (want_v) {
    W.noalias() = ta.phiw * G;
    for (int c = 0; c < 6; ++c)
      out.V[(size_t)(3 * kUpperI[c] + kUpperJ[c])].noalias() =
          W.middleCols(c * nb, nb) * tb.phiw.transpose();
    mirror_lower(out.V);
  }
  if (want_k) {
    W.noalias() = ta.phiw * Tab_;
    for (int c = 0; c < 6; ++c)
      out.Kab[(size_t)(3 * kUpperI[c] + kUpperJ[c])].noalias() =
          W.middleCols(c * nb, nb) * tb.phiw.transpose();
    mirror_lower(out.Kab);
    W.noalias() = ta.phiw * Tba;
    for (int c = 0; c < 6; ++c)
      out.Kba[(size_t)(3 * kUpperI[c] + kUpperJ[c])].noalias() =
          W.middleCols(c * nb, nb) * tb.phiw.transpose();
    mirror_lower(out.Kba);
  }
}

void scatter_sym(Eigen::MatrixXd& M, const std::array<Eigen::MatrixXd, 9>& B,
                 const std::vector<int>& sa, const std::vector<int>& sb,
                 bool mirror) {
  int Ka = (int)sa.size(), Kb = (int)sb.size();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Eigen::MatrixXd& Bij = B[(size_t)(3 * i + j)];
      for (int p = 0; p < Ka; ++p) {
        int rp = 3 * sa[(size_t)p] + i;
        for (int qq = 0; qq < Kb; ++qq) {
          int cq = 3 * sb[(size_t)qq] + j;
          double v = Bij(p, qq);
          M(rp, cq) += v;
          if (mirror) M(cq, rp) += v;
        }
      }
    }
}

void scatter_plain(Eigen::MatrixXd& M, const std::array<Eigen::MatrixXd, 9>& B,
                   const std::vector<int>& srow, const std::vector<int>& scol) {
  int Ka = (int)srow.size(), Kb = (int)scol.size();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Eigen::MatrixXd& Bij = B[(size_t)(3 * i + j)];
      for (int p = 0; p < Ka; ++p)
        for (int qq = 0; qq < Kb; ++qq)
          M(3 * srow[(size_t)p] + i, 3 * scol[(size_t)qq] + j) += Bij(p, qq);
    }
}

// B_ij indexed (a-side p, b-side q) but with the b side acting as the test
// space: entry goes to row (sb[q], i), column (sa[p], j)
void scatter_swapped(Eigen::MatrixXd& M, const std::array<Eigen::MatrixXd, 9>& B,
                     const std::vector<int>& sa, const std::vector<int>& sb) {
  int Ka = (int)sa.size(), Kb = (int)sb.size();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Eigen::MatrixXd& Bij = B[(size_t)(3 * i + j)];
      for (int p = 0; p < Ka; ++p)
        for (int qq = 0; qq < Kb; ++qq)
          M(3 * sb[(size_t)qq] + i, 3 * sa[(size_t)p] + j) += Bij(p, qq);
    }
}

// corner frames for the canonical pair rules; edge/corner indices are in the
// patch frame of each element
struct Alignment {
  int ca = 0, cb = 0;
  bool reverse_b = false;
};

// Adjacent pairs whose rule layout matches (same case, corner frames and
// basis types on both sides) consume identical parameter points and basis
// weights at every order, so they are refined in lockstep: each chunk of
// rule points evaluates the basis once and then feeds every pair that is
// still refining. Chunking keeps the working set cache resident, and the
// tables are zero-padded to a multiple of eight rows, which the small dense
// products run substantially faster on.
constexpr int kChunk = 4096;

struct GroupPair {
  int a = 0, b = 0;
  Eigen::MatrixXd Ga, Gb;  // 3 x padded-K control point gathers
  PairBlocks prev, cur;
  std::array<Eigen::MatrixXd, 9> Vacc, KabAcc, KbaAcc;
  bool v_live = true, k_live = false;
  bool v_frozen = false, k_frozen = false;
  bool have_prev = false, converged = false;
  int q_used = 0;
};

struct GroupScratch {
  std::vector<double> ua, va, ub, vb, wr;
  Eigen::MatrixXd sval, sdu, sdv;                  // native-K staging
  Eigen::MatrixXd phia, dua, dva, phib, dub, dvb;  // padded tables
  Eigen::Matrix3Xd posa, posb, cva, cvb, xu, xv, r;
  Eigen::Array<double, 1, Eigen::Dynamic> w, Ja, Jb, iR, iR2, iR5, f;
  Eigen::MatrixXd X, Y[3], Z, D;
};

void padded_tables(const PatchSet& ps, const SubdivisionPatch& p,
                   const double* u, const double* v, GroupScratch& s,
                   Eigen::MatrixXd& val, Eigen::MatrixXd& du,
                   Eigen::MatrixXd& dv) {
  ps.basis_batch(p, u, v, kChunk, 1, s.sval, s.sdu, s.sdv);
  int K = (int)s.sval.rows();
  val.topRows(K) = s.sval;
  du.topRows(K) = s.sdu;
  dv.topRows(K) = s.sdv;
}

void raw_cross(const Eigen::Matrix3Xd& xu, const Eigen::Matrix3Xd& xv,
               Eigen::Matrix3Xd& out) {
  out.row(0) = xu.row(1).cwiseProduct(xv.row(2)) - xu.row(2).cwiseProduct(xv.row(1));
  out.row(1) = xu.row(2).cwiseProduct(xv.row(0)) - xu.row(0).cwiseProduct(xv.row(2));
  out.row(2) = xu.row(0).cwiseProduct(xv.row(1)) - xu.row(1).cwiseProduct(xv.row(0));
}

void run_singular_group(const PatchSet& ps, const Coeffs& C, PairCase kind,
                        const Alignment& al,
                        const std::vector<std::array<int, 2>>& members,
                        bool dl, const QuadratureParams& qp,
                        QuadratureStats& stats, GroupScratch& s,
                        Eigen::MatrixXd& Vmat, Eigen::MatrixXd& Kmat) {
  const SubdivisionPatch& pa0 = ps.patch(members[0][0]);
  const SubdivisionPatch& pb0 = ps.patch(members[0][1]);
  int Ka = (int)pa0.stencil.size(), Kb = (int)pb0.stencil.size();
  int Kpa = (Ka + 7) & ~7, Kpb = (Kb + 7) & ~7;
  bool same = kind == PairCase::Identical;

  std::vector<GroupPair> gp(members.size());
  for (size_t i = 0; i < members.size(); ++i) {
    GroupPair& g = gp[i];
    g.a = members[i][0];
    g.b = members[i][1];
    g.k_live = dl;
    g.q_used = qp.q_max;
    g.Ga.setZero(3, Kpa);
    const std::vector<int>& sa = ps.patch(g.a).stencil;
    for (int c = 0; c < Ka; ++c) g.Ga.col(c) = C.row(sa[(size_t)c]).transpose();
    g.Gb.setZero(3, Kpb);
    const std::vector<int>& sb = ps.patch(g.b).stencil;
    for (int c = 0; c < Kb; ++c) g.Gb.col(c) = C.row(sb[(size_t)c]).transpose();
    g.cur.kba = g.prev.kba = dl && !same;
  }

  s.ua.resize(kChunk);
  s.va.resize(kChunk);
  s.ub.resize(kChunk);
  s.vb.resize(kChunk);
  s.wr.resize(kChunk);
  s.phia.setZero(Kpa, kChunk);
  s.dua.setZero(Kpa, kChunk);
  s.dva.setZero(Kpa, kChunk);
  s.phib.setZero(Kpb, kChunk);
  s.dub.setZero(Kpb, kChunk);
  s.dvb.setZero(Kpb, kChunk);

  for (int q = qp.q_min; q <= qp.q_max; ++q) {
    bool any = false;
    for (GroupPair& g : gp) {
      if (g.converged) continue;
      any = true;
      for (int c = 0; c < 9; ++c) {
        if (g.v_live) g.cur.V[(size_t)c].setZero(Kpa, Kpb);
        if (g.k_live) {
          g.cur.Kab[(size_t)c].setZero(Kpa, Kpb);
          if (!same) g.cur.Kba[(size_t)c].setZero(Kpa, Kpb);
        }
      }
    }
    if (!any) break;

    int fill = 0;
    auto flush = [&]() {
      if (fill == 0) return;
      for (int t = fill; t < kChunk; ++t) {  // zero-weight filler points
        s.ua[(size_t)t] = s.ua[(size_t)(fill - 1)];
        s.va[(size_t)t] = s.va[(size_t)(fill - 1)];
        s.ub[(size_t)t] = s.ub[(size_t)(fill - 1)];
        s.vb[(size_t)t] = s.vb[(size_t)(fill - 1)];
        s.wr[(size_t)t] = 0.0;
      }
      fill = 0;
      padded_tables(ps, pa0, s.ua.data(), s.va.data(), s, s.phia, s.dua, s.dva);
      padded_tables(ps, pb0, s.ub.data(), s.vb.data(), s, s.phib, s.dub, s.dvb);
      s.w = Eigen::Map<const Eigen::Array<double, 1, Eigen::Dynamic>>(
          s.wr.data(), kChunk);
      for (GroupPair& g : gp) {
        if (g.converged) continue;
        s.posa.noalias() = g.Ga * s.phia;
        s.xu.noalias() = g.Ga * s.dua;
        s.xv.noalias() = g.Ga * s.dva;
        raw_cross(s.xu, s.xv, s.cva);
        s.posb.noalias() = g.Gb * s.phib;
        s.xu.noalias() = g.Gb * s.dub;
        s.xv.noalias() = g.Gb * s.dvb;
        raw_cross(s.xu, s.xv, s.cvb);
        s.r = s.posa - s.posb;
        s.iR2.resize(kChunk);
        for (int t = 0; t < kChunk; ++t) {
          double R2 = s.r.col(t).squaredNorm();
          if (!(R2 > 0)) throw Error("singular rule emitted a coincident point");
          s.iR2(t) = 1.0 / R2;
        }
        s.iR = s.iR2.sqrt();
        s.Ja = s.cva.colwise().norm().array();
        s.Jb = s.cvb.colwise().norm().array();
        // per-point factors fold into the test side; the trial side carries
        // only the kernel coordinates, shared by every operator
        for (int j = 0; j < 3; ++j)
          s.Y[j] = (s.phib.array().rowwise() * s.r.row(j).array()).matrix();
        if (g.v_live) {
          s.f = (kC1 * s.w) * s.Ja * s.Jb * s.iR * s.iR2;
          for (int i = 0; i < 3; ++i) {
            s.X = (s.phia.array().rowwise() * (s.f * s.r.row(i).array())).matrix();
            for (int j = i; j < 3; ++j)
              g.cur.V[(size_t)(3 * i + j)].noalias() += s.X * s.Y[j].transpose();
          }
          s.f = (kC1 * s.w) * s.Ja * s.Jb * s.iR;
          s.Z = (s.phia.array().rowwise() * s.f).matrix();
          s.D.noalias() = s.Z * s.phib.transpose();
          g.cur.V[0] += s.D;
          g.cur.V[4] += s.D;
          g.cur.V[8] += s.D;
        }
        if (g.k_live) {
          // the raw area vector absorbs the normalization that the point
          // weight would otherwise contribute
          s.iR5 = s.iR2.square() * s.iR;
          s.f = (kC3 * s.w) * s.Ja * s.iR5 *
                (s.r.array() * s.cvb.array()).colwise().sum();
          for (int i = 0; i < 3; ++i) {
            s.X = (s.phia.array().rowwise() * (s.f * s.r.row(i).array())).matrix();
            for (int j = i; j < 3; ++j)
              g.cur.Kab[(size_t)(3 * i + j)].noalias() += s.X * s.Y[j].transpose();
          }
          if (!same) {
            s.f = (-kC3 * s.w) * s.Jb * s.iR5 *
                  (s.r.array() * s.cva.array()).colwise().sum();
            for (int i = 0; i < 3; ++i) {
              s.X = (s.phia.array().rowwise() * (s.f * s.r.row(i).array())).matrix();
              for (int j = i; j < 3; ++j)
                g.cur.Kba[(size_t)(3 * i + j)].noalias() += s.X * s.Y[j].transpose();
            }
          }
        }
      }
    };
    for_each_pair_point(kind, q, [&](const PairPoint& pt) {
      double x, y;
      square_corner_param(al.ca, pt.ax, pt.ay, x, y);
      s.ua[(size_t)fill] = x;
      s.va[(size_t)fill] = y;
      double bx = al.reverse_b ? 1.0 - pt.bx : pt.bx;
      square_corner_param(al.cb, bx, pt.by, x, y);
      s.ub[(size_t)fill] = x;
      s.vb[(size_t)fill] = y;
      s.wr[(size_t)fill] = pt.w;
      if (++fill == kChunk) flush();
    });
    flush();

    for (GroupPair& g : gp) {
      if (g.converged) continue;
      if (g.v_live) mirror_lower(g.cur.V);
      if (g.k_live) {
        mirror_lower(g.cur.Kab);
        if (!same) mirror_lower(g.cur.Kba);
      }
      if (qp.q_min == qp.q_max) {
        g.converged = true;
        g.q_used = q;
        continue;
      }
      if (g.have_prev) {
        if (g.v_live && g.cur.diff_v(g.prev) < qp.tol) {
          g.v_live = false;
          g.v_frozen = true;
          g.Vacc = std::move(g.cur.V);
        }
        if (g.k_live && g.cur.diff_k(g.prev) < qp.tol) {
          g.k_live = false;
          g.k_frozen = true;
          g.KabAcc = std::move(g.cur.Kab);
          g.KbaAcc = std::move(g.cur.Kba);
        }
        if (!g.v_live && !g.k_live) {
          g.converged = true;
          g.q_used = q;
          continue;
        }
      }
      if (q < qp.q_max) {
        std::swap(g.prev, g.cur);
        g.have_prev = true;
      }
    }
  }

  for (GroupPair& g : gp) {
    if (!g.converged) {
      ++stats.nonconverged;
      g.q_used = qp.q_max;
    }
    stats.record(g.q_used);
    const std::vector<int>& sa = ps.patch(g.a).stencil;
    const std::vector<int>& sb = ps.patch(g.b).stencil;
    scatter_sym(Vmat, g.v_frozen ? g.Vacc : g.cur.V, sa, sb, g.a != g.b);
    if (dl) {
      scatter_plain(Kmat, g.k_frozen ? g.KabAcc : g.cur.Kab, sa, sb);
      if (g.a != g.b)
        scatter_swapped(Kmat, g.k_frozen ? g.KbaAcc : g.cur.Kba, sa, sb);
    }
  }
}

}  // namespace

void BoundaryOperators::assemble(const Coeffs& theta, double lambda,
                                 const QuadratureParams& qp,
                                 QuadratureStats& stats) {
  const QuadMesh& m = ps_.mesh();
  if ((int)theta.rows() != m.num_vertices())
    throw Error("configuration does not match the control mesh");
  if (qp.q_min < 1 || qp.q_max < qp.q_min)
    throw Error("invalid quadrature order bounds");
  lambda_ = lambda;
  bool dl = !(lambda == 1.0);
  int n3 = 3 * m.num_vertices();
  V_.setZero(n3, n3);
  if (dl)
    K_.setZero(n3, n3);
  else
    K_.resize(0, 0);
  M_ = assemble_surface_mass(ps_, theta, kSmoothOrder);
  g_ = assemble_weighted_normal(ps_, theta, kSmoothOrder);
  area_ = assemble_basis_measure(ps_, theta, kSmoothOrder);

  TabCache cache((size_t)m.num_quads());
  int F = m.num_quads();
  // adjacent pairs are binned by rule layout and basis type so each bin can
  // share parameter points and basis tables across its whole ladder
  std::map<std::array<int, 6>, std::vector<std::array<int, 2>>> groups;
  for (int a = 0; a < F; ++a) {
    const std::vector<int>& sa = ps_.patch(a).stencil;
    for (int b = a; b < F; ++b) {
      AdjacencyCase ac = m.classify_adjacency(a, b);
      if (ac.kind != PairCase::Disjoint) {
        Alignment al;
        if (ac.kind != PairCase::Identical) {
          al.ca = (ac.a - ps_.patch(a).rot + 4) & 3;
          al.cb = (ac.b - ps_.patch(b).rot + 4) & 3;
          al.reverse_b = ac.kind == PairCase::CommonEdge;
        }
        const SubdivisionPatch& pa = ps_.patch(a);
        const SubdivisionPatch& pb = ps_.patch(b);
        groups[{(int)ac.kind, al.ca, al.cb, al.reverse_b ? 1 : 0,
                pa.extraordinary ? pa.valence : 0,
                pb.extraordinary ? pb.valence : 0}]
            .push_back({a, b});
        continue;
      }
      const std::vector<int>& sb = ps_.patch(b).stencil;
      // each operator freezes at its own converged order; the pair is
      // accepted once the slowest one settles
      PairBlocks prev, cur;
      std::array<Eigen::MatrixXd, 9> Vacc, KabAcc, KbaAcc;
      bool v_live = true, k_live = dl;
      bool v_frozen = false, k_frozen = false;
      bool converged = false;
      bool have_prev = false;
      int q_used = qp.q_max;
      for (int q = qp.q_min; q <= qp.q_max; ++q) {
        const ElemTab& ta = elem_table(cache, ps_, theta, a, q);
        const ElemTab& tb = elem_table(cache, ps_, theta, b, q);
        disjoint_blocks(ta, tb, v_live, k_live, cur);
        if (qp.q_min == qp.q_max) {
          converged = true;
          q_used = q;
          break;
        }
        if (have_prev) {
          if (v_live && cur.diff_v(prev) < qp.tol) {
            v_live = false;
            v_frozen = true;
            Vacc = std::move(cur.V);
          }
          if (k_live && cur.diff_k(prev) < qp.tol) {
            k_live = false;
            k_frozen = true;
            KabAcc = std::move(cur.Kab);
            KbaAcc = std::move(cur.Kba);
          }
          if (!v_live && !k_live) {
            converged = true;
            q_used = q;
            break;
          }
        }
        if (q < qp.q_max) {
          std::swap(prev, cur);
          have_prev = true;
        }
      }
      if (!converged) {
        ++stats.nonconverged;
        q_used = qp.q_max;
      }
      stats.record(q_used);
      scatter_sym(V_, v_frozen ? Vacc : cur.V, sa, sb, a != b);
      if (dl) {
        scatter_plain(K_, k_frozen ? KabAcc : cur.Kab, sa, sb);
        if (a != b) scatter_swapped(K_, k_frozen ? KbaAcc : cur.Kba, sa, sb);
      }
    }
  }
  GroupScratch scratch;
  for (auto& [key, members] : groups) {
    Alignment al;
    al.ca = key[1];
    al.cb = key[2];
    al.reverse_b = key[3] != 0;
    run_singular_group(ps_, theta, (PairCase)key[0], al, members, dl, qp,
                       stats, scratch, V_, K_);
  }
  factored_ = false;
}

Eigen::VectorXd BoundaryOperators::velocity_rhs(const Coeffs& gbar) const {
  const QuadMesh& m = ps_.mesh();
  if ((int)gbar.rows() != m.num_vertices())
    throw Error("boundary data does not match the control mesh");
  Eigen::VectorXd v(3 * m.num_vertices());
  for (int a = 0; a < m.num_vertices(); ++a)
    v.segment<3>(3 * a) = gbar.row(a).transpose();
  if (std::isinf(lambda_)) {
    if (!has_double_layer()) throw Error("double layer missing for lambda = inf");
    return K_ * v - 0.5 * (M_ * v);
  }
  Eigen::VectorXd rhs = (0.5 * (1.0 + lambda_)) * (M_ * v);
  if (lambda_ != 1.0) rhs += (1.0 - lambda_) * (K_ * v);
  return rhs;
}

BoundaryOperators::Solution BoundaryOperators::solve(
    const Eigen::VectorXd& rhs) const {
  int n3 = (int)V_.rows();
  if (n3 == 0) throw Error("operators not assembled");
  if ((int)rhs.size() != n3) throw Error("right-hand side size mismatch");
  if (!factored_) {
    Eigen::MatrixXd S(n3 + 1, n3 + 1);
    S.topLeftCorner(n3, n3) = V_;
    S.topRightCorner(n3, 1) = g_;
    S.bottomLeftCorner(1, n3) = g_.transpose();
    S(n3, n3) = 0.0;
    lu_.compute(S);
    factored_ = true;
  }
  Eigen::VectorXd full(n3 + 1);
  full.head(n3) = rhs;
  full(n3) = 0.0;
  Eigen::VectorXd x = lu_.solve(full);
  Solution sol;
  sol.traction.resize(n3 / 3, 3);
  for (int a = 0; a < n3 / 3; ++a) sol.traction.row(a) = x.segment<3>(3 * a).transpose();
  sol.zeta = x(n3);
  return sol;
}

Eigen::MatrixXd assemble_surface_mass(const PatchSet& ps, const Coeffs& geometry,
                                      int order) {
  const QuadMesh& m = ps.mesh();
  int n3 = 3 * m.num_vertices();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n3, n3);
  const TensorRule& tr = tensor01(order);
  BatchEval be;
  for (int f = 0; f < m.num_quads(); ++f) {
    const SubdivisionPatch& p = ps.patch(f);
    eval_batch(ps, p, geometry, tr.u.data(), tr.v.data(), tr.n(), be);
    int K = (int)p.stencil.size();
    Eigen::MatrixXd phiw = be.phi;
    for (int t = 0; t < tr.n(); ++t)
      phiw.col(t) *= tr.w(t) * be.crossv.col(t).norm();
    Eigen::MatrixXd Me = phiw * be.phi.transpose();
    for (int p1 = 0; p1 < K; ++p1)
      for (int p2 = 0; p2 < K; ++p2) {
        double v = Me(p1, p2);
        for (int i = 0; i < 3; ++i)
          M(3 * p.stencil[(size_t)p1] + i, 3 * p.stencil[(size_t)p2] + i) += v;
      }
  }
  return M;
}

Eigen::VectorXd assemble_weighted_normal(const PatchSet& ps,
                                         const Coeffs& geometry, int order) {
  const QuadMesh& m = ps.mesh();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * m.num_vertices());
  const TensorRule& tr = tensor01(order);
  BatchEval be;
  for (int f = 0; f < m.num_quads(); ++f) {
    const SubdivisionPatch& p = ps.patch(f);
    eval_batch(ps, p, geometry, tr.u.data(), tr.v.data(), tr.n(), be);
    for (int t = 0; t < tr.n(); ++t) {
      Vec3 cw = tr.w(t) * be.crossv.col(t);
      for (int a = 0; a < (int)p.stencil.size(); ++a)
        g.segment<3>(3 * p.stencil[(size_t)a]) += be.phi(a, t) * cw;
    }
  }
  return g;
}

Eigen::VectorXd assemble_basis_measure(const PatchSet& ps,
                                       const Coeffs& geometry, int order) {
  const QuadMesh& m = ps.mesh();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m.num_vertices());
  const TensorRule& tr = tensor01(order);
  BatchEval be;
  for (int f = 0; f < m.num_quads(); ++f) {
    const SubdivisionPatch& p = ps.patch(f);
    eval_batch(ps, p, geometry, tr.u.data(), tr.v.data(), tr.n(), be);
    for (int t = 0; t < tr.n(); ++t) {
      double cw = tr.w(t) * be.crossv.col(t).norm();
      for (int a = 0; a < (int)p.stencil.size(); ++a)
        w(p.stencil[(size_t)a]) += be.phi(a, t) * cw;
    }
  }
  return w;
}

double min_gap(const PatchSet& ps, const Coeffs& geometry, int samples_per_dim) {
  const QuadMesh& m = ps.mesh();
  if (samples_per_dim < 1) throw Error("need at least one sample per direction");
  int s = samples_per_dim;
  std::vector<double> us((size_t)(s * s)), vs((size_t)(s * s));
  for (int j = 0; j < s; ++j)
    for (int i = 0; i < s; ++i) {
      us[(size_t)(j * s + i)] = (i + 0.5) / s;
      vs[(size_t)(j * s + i)] = (j + 0.5) / s;
    }
  std::vector<Eigen::Matrix3Xd> pts((size_t)m.num_quads());
  BatchEval be;
  for (int f = 0; f < m.num_quads(); ++f) {
    eval_batch(ps, ps.patch(f), geometry, us.data(), vs.data(), s * s, be);
    pts[(size_t)f] = be.pos;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < m.num_quads(); ++a)
    for (int b = a + 1; b < m.num_quads(); ++b) {
      if (m.classify_adjacency(a, b).kind != PairCase::Disjoint) continue;
      for (int i = 0; i < s * s; ++i)
        for (int j = 0; j < s * s; ++j) {
          double d = (pts[(size_t)a].col(i) - pts[(size_t)b].col(j)).norm();
          best = std::min(best, d);
        }
    }
  return best;
}

}  // namespace febe
