#include "febe/fsi.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "febe/quadrature.hpp"

namespace febe {

namespace {

Eigen::VectorXd flatten(const Coeffs& c) {
  Eigen::VectorXd x(3 * c.rows());
  for (int a = 0; a < c.rows(); ++a)
    for (int i = 0; i < 3; ++i) x(3 * a + i) = c(a, i);
  return x;
}

}  // namespace

StructuralSolver::StructuralSolver(const PatchSet& ps, const ShellParams& prm,
                                   double varpi, int order)
    : ps_(ps), prm_(prm), varpi_(varpi), energy_(ps, prm, order), volume_(ps, order) {
  const QuadMesh& m = ps.mesh();
  mass_ = assemble_surface_mass(ps, ps.reference(), order);
  for (int v = 0; v < m.num_vertices(); ++v)
    if (!m.touches_inflow(v) && !m.on_boundary_curve(v)) free_.push_back(v);

  const TensorRule& tr = tensor01(order);
  lqp_.resize((size_t)m.num_quads());
  BasisValues b;
  for (int f = 0; f < m.num_quads(); ++f) {
    const SubdivisionPatch& p = ps.patch(f);
    lqp_[(size_t)f].reserve((size_t)tr.n());
    for (int t = 0; t < tr.n(); ++t) {
      ps.basis(p, tr.u(t), tr.v(t), 1, b);
      LoadQP q;
      q.wr = b.w.topRows<3>();
      q.w = tr.w(t);
      Jet2 jr = ps.evaluate(p, ps.reference(), tr.u(t), tr.v(t), 1);
      q.nref = jr.xu.cross(jr.xv);
      lqp_[(size_t)f].push_back(std::move(q));
    }
  }
}

void StructuralSolver::load(const Coeffs& theta, const Coeffs& traction,
                            Eigen::VectorXd* out, Eigen::MatrixXd* jac) const {
  const QuadMesh& m = ps_.mesh();
  int n3 = 3 * m.num_vertices();
  if (out) {
    out->resize(n3);
    out->setZero();
  }
  if (jac) {
    jac->resize(n3, n3);
    jac->setZero();
  }
  for (int f = 0; f < m.num_quads(); ++f) {
    const std::vector<int>& st = ps_.patch(f).stencil;
    int K = (int)st.size();
    for (const LoadQP& q : lqp_[(size_t)f]) {
      Vec3 xu = Vec3::Zero(), xv = Vec3::Zero(), tbar = Vec3::Zero();
      for (int a = 0; a < K; ++a) {
        const int id = st[(size_t)a];
        xu += q.wr(1, a) * theta.row(id).transpose();
        xv += q.wr(2, a) * theta.row(id).transpose();
        tbar += q.wr(0, a) * traction.row(id).transpose();
      }
      Vec3 cr = xu.cross(xv);
      double area = cr.norm();
      if (!(area > 0)) throw Error("degenerate element in load assembly");
      if (out) {
        double s = q.w * area;
        for (int c = 0; c < K; ++c) {
          double pc = s * q.wr(0, c);
          for (int i = 0; i < 3; ++i) (*out)(3 * st[(size_t)c] + i) += pc * tbar(i);
        }
      }
      if (jac) {
        Vec3 nh = cr / area;
        Vec3 gu = xv.cross(nh);
        Vec3 gv = nh.cross(xu);
        for (int c = 0; c < K; ++c) {
          double pc = q.w * q.wr(0, c);
          for (int b = 0; b < K; ++b) {
            double bu = q.wr(1, b), bv = q.wr(2, b);
            for (int j = 0; j < 3; ++j) {
              double dA = gu(j) * bu + gv(j) * bv;
              double w = pc * dA;
              for (int i = 0; i < 3; ++i)
                (*jac)(3 * st[(size_t)c] + i, 3 * st[(size_t)b] + j) += w * tbar(i);
            }
          }
        }
      }
    }
  }
}

bool StructuralSolver::orientation_ok(const Coeffs& theta) const {
  const QuadMesh& m = ps_.mesh();
  for (int f = 0; f < m.num_quads(); ++f) {
    const std::vector<int>& st = ps_.patch(f).stencil;
    int K = (int)st.size();
    for (const LoadQP& q : lqp_[(size_t)f]) {
      Vec3 xu = Vec3::Zero(), xv = Vec3::Zero();
      for (int a = 0; a < K; ++a) {
        const int id = st[(size_t)a];
        xu += q.wr(1, a) * theta.row(id).transpose();
        xv += q.wr(2, a) * theta.row(id).transpose();
      }
      if (!(xu.cross(xv).dot(q.nref) > 0)) return false;
    }
  }
  return true;
}

NewtonResult StructuralSolver::step(const Coeffs& theta_init,
                                    const Coeffs& theta_n, const Coeffs& v_n,
                                    const Coeffs& traction, double p0_init,
                                    double target_volume, double tau, double tol,
                                    int max_newton) const {
  const QuadMesh& m = ps_.mesh();
  const int nfv = (int)free_.size();
  const int nf = 3 * nfv;
  const double itau2 = 1.0 / (tau * tau);

  Coeffs theta = theta_init;
  double p0 = p0_init;
  Eigen::VectorXd disp_base = flatten(theta_n) + tau * flatten(v_n);

  struct Res {
    double merit = 0;
    double q = 0;
    Eigen::VectorXd r;  // full residual
  };
  auto eval = [&](const Coeffs& th, double p) {
    Res out;
    Eigen::VectorXd gW, gQ, L;
    double vol = 0;
    energy_.assemble(th, nullptr, &gW, nullptr);
    volume_.assemble(th, &vol, &gQ, nullptr);
    load(th, traction, &L, nullptr);
    // p0 is the excess pressure: positive p0 pushes the surface outward
    out.r = mass_ * ((flatten(th) - disp_base) * itau2) + gW - p * gQ + varpi_ * L;
    out.q = vol - target_volume;
    out.merit = std::fabs(out.q);
    for (int k = 0; k < nfv; ++k)
      for (int i = 0; i < 3; ++i)
        out.merit = std::max(out.merit, std::fabs(out.r(3 * free_[(size_t)k] + i)));
    return out;
  };

  Res cur = eval(theta, p0);
  int it = 0;
  while (true) {
    if (cur.merit < tol)
      return NewtonResult{std::move(theta), p0, it, cur.merit, it == 0};
    if (it >= max_newton) throw Error("structural Newton did not converge");

    Eigen::VectorXd gW, gQ, L;
    Eigen::MatrixXd HW, HQ, JL;
    double vol = 0;
    energy_.assemble(theta, nullptr, &gW, &HW);
    volume_.assemble(theta, &vol, &gQ, &HQ);
    load(theta, traction, &L, &JL);

    Eigen::MatrixXd A(nf + 1, nf + 1);
    A.setZero();
    for (int ka = 0; ka < nfv; ++ka)
      for (int i = 0; i < 3; ++i) {
        int fi = 3 * ka + i, di = 3 * free_[(size_t)ka] + i;
        for (int kb = 0; kb < nfv; ++kb)
          for (int j = 0; j < 3; ++j) {
            int fj = 3 * kb + j, dj = 3 * free_[(size_t)kb] + j;
            A(fi, fj) = mass_(di, dj) * itau2 + HW(di, dj) - p0 * HQ(di, dj) +
                        varpi_ * JL(di, dj);
          }
        A(fi, nf) = -gQ(di);
        A(nf, fi) = -gQ(di);
      }
    Eigen::VectorXd rhs(nf + 1);
    for (int k = 0; k < nfv; ++k)
      for (int i = 0; i < 3; ++i) rhs(3 * k + i) = -cur.r(3 * free_[(size_t)k] + i);
    rhs(nf) = cur.q;
    Eigen::VectorXd d = A.partialPivLu().solve(rhs);

    double alpha = 1.0;
    bool accepted = false;
    Coeffs trial;
    double p_trial = p0;
    Res rt;
    for (int ls = 0; ls <= 20; ++ls) {
      trial = theta;
      for (int k = 0; k < nfv; ++k)
        for (int i = 0; i < 3; ++i) trial(free_[(size_t)k], i) += alpha * d(3 * k + i);
      p_trial = p0 + alpha * d(nf);
      if (orientation_ok(trial)) {
        rt = eval(trial, p_trial);
        if (rt.merit < cur.merit) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) throw Error("structural line search failed");
    theta = std::move(trial);
    p0 = p_trial;
    cur = std::move(rt);
    ++it;
  }
  (void)m;
}

FsiDriver::FsiDriver(const PatchSet& ps, InflowProfile inflow, CouplingSettings cs)
    : ps_(ps),
      inflow_(std::move(inflow)),
      cs_(cs),
      structural_(ps, cs.shell, cs.varpi),
      fluid_(ps) {
  const int nv = ps.mesh().num_vertices();
  if (inflow_.velocity.rows() == 0) {
    inflow_.velocity.resize(nv, 3);
    inflow_.velocity.setZero();
  } else if ((int)inflow_.velocity.rows() != nv) {
    throw Error("inflow profile does not match the mesh");
  }
  volume0_ = structural_.volume(ps.reference());
}

FsiState FsiDriver::initial_state() const {
  FsiState s;
  const int nv = ps_.mesh().num_vertices();
  s.theta = ps_.reference();
  s.theta_prev = s.theta;
  s.velocity.resize(nv, 3);
  s.velocity.setZero();
  s.traction.resize(nv, 3);
  s.traction.setZero();
  return s;
}

void FsiDriver::step(FsiState& s) {
  const double tau = cs_.tau;
  Coeffs trial = s.theta + tau * s.velocity;
  const double target = volume0_ - (s.influx + tau * inflow_.rate);
  Coeffs traction = s.traction;
  double p0 = s.p0, zeta = s.zeta;
  const long nonconv_before = stats_.nonconverged;

  int subiters = 0, newton_total = 0;
  bool converged = false;
  while (!converged) {
    if (subiters >= cs_.max_subiterations) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "subiteration limit reached at t=%g", s.t + tau);
      throw Error(buf);
    }
    ++subiters;
    NewtonResult nr = structural_.step(trial, s.theta, s.velocity, traction, p0,
                                       target, tau, cs_.tol, cs_.max_newton);
    newton_log_.push_back(
        {step_index_ + 1, subiters, nr.iterations, nr.residual, nr.p0});
    newton_total += nr.iterations;
    trial = std::move(nr.theta);
    p0 = nr.p0;

    Coeffs gbar = (trial - s.theta) / tau + inflow_.velocity;
    fluid_.assemble(trial, cs_.lambda, cs_.quad, stats_);
    BoundaryOperators::Solution sol = fluid_.solve(fluid_.velocity_rhs(gbar));
    double dt_max = (sol.traction - traction).cwiseAbs().maxCoeff();
    traction = std::move(sol.traction);
    zeta = sol.zeta;
    converged = nr.pre_converged && dt_max < cs_.tol;
  }

  s.theta_prev = std::move(s.theta);
  s.theta = std::move(trial);
  s.velocity = (s.theta - s.theta_prev) / tau;
  s.traction = std::move(traction);
  s.p0 = p0;
  s.zeta = zeta;
  s.influx += tau * inflow_.rate;
  s.t += tau;
  s.last_subiters = subiters;
  s.last_newton = newton_total;
  s.last_quad_nonconv = stats_.nonconverged - nonconv_before;
  ++step_index_;

  StepRecord rec;
  rec.t = s.t;
  rec.volume = structural_.volume(s.theta);
  rec.p0 = s.p0;
  rec.min_gap = min_gap(ps_, s.theta, 3);
  rec.subiters = subiters;
  rec.newton_total = newton_total;
  rec.quad_nonconv = s.last_quad_nonconv;
  history_.push_back(rec);
}

}  // namespace febe
