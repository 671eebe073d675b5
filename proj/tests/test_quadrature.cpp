#include <cmath>
#include <vector>

#include "doctest.h"
#include "febe/quadrature.hpp"
#include "oracles.hpp"

using namespace febe;

namespace {

double pair_sum(PairCase kind, int q,
                double (*f)(double, double, double, double)) {
  double s = 0;
  for_each_pair_point(kind, q, [&](const PairPoint& p) {
    s += p.w * f(p.ax, p.ay, p.bx, p.by);
  });
  return s;
}

double inv_dist_identical(double ax, double ay, double bx, double by) {
  return 1.0 / std::hypot(ax - bx, ay - by);
}
// second square folded across the shared edge y = 0
double inv_dist_edge(double ax, double ay, double bx, double by) {
  return 1.0 / std::hypot(ax - bx, ay + by);
}
// second square rotated half a turn about the shared corner
double inv_dist_vertex(double ax, double ay, double bx, double by) {
  return 1.0 / std::hypot(ax + bx, ay + by);
}

double hat(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

}  // namespace

TEST_CASE("interval rule basics") {
  const GaussRule1D& g1 = gauss01(1);
  REQUIRE(g1.x.size() == 1);
  CHECK(g1.x(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g1.w(0) == doctest::Approx(1.0).epsilon(1e-15));

  // q = 3 integrates degree 5 exactly
  const GaussRule1D& g3 = gauss01(3);
  double s = 0;
  for (int i = 0; i < 3; ++i) s += g3.w(i) * std::pow(g3.x(i), 5);
  CHECK(std::abs(s - 1.0 / 6.0) < 1e-15);

  const GaussRule1D& g10 = gauss01(10);
  double wsum = 0;
  for (int i = 0; i < 10; ++i) {
    CHECK(g10.w(i) > 0);
    wsum += g10.w(i);
    CHECK(std::abs(g10.x(i) + g10.x(9 - i) - 1.0) < 1e-15);
    CHECK(std::abs(g10.w(i) - g10.w(9 - i)) < 1e-15);
    if (i) CHECK(g10.x(i) > g10.x(i - 1));
  }
  CHECK(std::abs(wsum - 1.0) < 1e-14);

  CHECK(&gauss01(7) == &gauss01(7));  // cached
  CHECK_THROWS_AS(gauss01(0), Error);
}

TEST_CASE("tensor rule on the unit square") {
  const TensorRule& t = tensor01(4);
  REQUIRE(t.n() == 16);
  double s = 0, w = 0;
  for (int i = 0; i < t.n(); ++i) {
    s += t.w(i) * std::pow(t.u(i), 7) * std::pow(t.v(i), 6);
    w += t.w(i);
  }
  CHECK(std::abs(w - 1.0) < 1e-14);
  CHECK(std::abs(s - 1.0 / (8 * 7)) < 1e-15);
  // u is the fast index
  CHECK(t.v(0) == t.v(1));
  CHECK(t.u(0) != t.u(1));
}

TEST_CASE("pair rules integrate the constant exactly") {
  for (PairCase kind : {PairCase::Identical, PairCase::CommonEdge,
                        PairCase::CommonVertex, PairCase::Disjoint}) {
    for (int q : {2, 3, 5}) {
      double s = 0;
      long n = 0;
      for_each_pair_point(kind, q, [&](const PairPoint& p) {
        s += p.w;
        ++n;
        CHECK(p.ax > 0); CHECK(p.ax < 1);
        CHECK(p.ay > 0); CHECK(p.ay < 1);
        CHECK(p.bx > 0); CHECK(p.bx < 1);
        CHECK(p.by > 0); CHECK(p.by < 1);
        CHECK(p.w > 0);
      });
      CHECK(std::abs(s - 1.0) < 1e-13);
      CHECK(n > 0);
    }
  }
}

TEST_CASE("no pair point touches the singular set") {
  for (int q : {2, 4, 8}) {
    double dmin = 1e30;
    for_each_pair_point(PairCase::Identical, q, [&](const PairPoint& p) {
      dmin = std::min(dmin, std::hypot(p.ax - p.bx, p.ay - p.by));
    });
    CHECK(dmin > 0);
    dmin = 1e30;
    for_each_pair_point(PairCase::CommonEdge, q, [&](const PairPoint& p) {
      dmin = std::min(dmin, std::hypot(p.ax - p.bx, p.ay + p.by));
    });
    CHECK(dmin > 0);
    dmin = 1e30;
    for_each_pair_point(PairCase::CommonVertex, q, [&](const PairPoint& p) {
      dmin = std::min(dmin, std::hypot(p.ax + p.bx, p.ay + p.by));
    });
    CHECK(dmin > 0);
  }
}

TEST_CASE("disjoint case is the plain product rule") {
  long n = 0;
  double s = 0;
  for_each_pair_point(PairCase::Disjoint, 2, [&](const PairPoint& p) {
    ++n;
    s += p.w * p.ax * p.ax * p.ax * p.ay * p.ay * p.bx * p.by;
  });
  CHECK(n == 16);
  CHECK(std::abs(s - (1.0 / 4) * (1.0 / 3) * (1.0 / 2) * (1.0 / 2)) < 1e-15);
}

TEST_CASE("singular pair integrals converge to independent values") {
  struct Case {
    PairCase kind;
    double (*f)(double, double, double, double);
    double exact;
  };
  const Case cases[] = {
      {PairCase::Identical, inv_dist_identical, oracle::unit_square_self_potential()},
      {PairCase::CommonEdge, inv_dist_edge, oracle::edge_pair_potential()},
      {PairCase::CommonVertex, inv_dist_vertex, oracle::vertex_pair_potential()},
  };
  for (const Case& c : cases) {
    double e2 = std::abs(pair_sum(c.kind, 2, c.f) - c.exact);
    double e5 = std::abs(pair_sum(c.kind, 5, c.f) - c.exact);
    double e16 = std::abs(pair_sum(c.kind, 16, c.f) - c.exact);
    CHECK(e16 < 1e-9 * std::abs(c.exact));
    CHECK(e16 < e5);
    CHECK(e5 < e2);
  }
}

TEST_CASE("overlap reduction reproduces the closed form") {
  double got = oracle::radial_potential(
      [](double z1, double z2) { return hat(z1) * hat(z2); }, -1, 1, -1, 1,
      {-1, 0, 1}, {-1, 0, 1});
  CHECK(std::abs(got - oracle::unit_square_self_potential()) < 1e-12);
  CHECK(std::abs(oracle::unit_square_self_potential() - 2.9732095982473792) <
        1e-14);
}

TEST_CASE("pair rules are exchange symmetric") {
  // swapping the two factors maps the point set onto itself
  auto g = [](double ax, double ay, double bx, double by) {
    return std::sin(1.3 * ax + 0.4) * by * by + ay * std::exp(bx - ay) +
           0.7 * ax * bx;
  };
  for (PairCase kind : {PairCase::Identical, PairCase::CommonEdge,
                        PairCase::CommonVertex, PairCase::Disjoint}) {
    for (int q : {3, 5}) {
      double diff = 0, scale = 0;
      for_each_pair_point(kind, q, [&](const PairPoint& p) {
        diff += p.w * (g(p.ax, p.ay, p.bx, p.by) - g(p.bx, p.by, p.ax, p.ay));
        scale += p.w * std::abs(g(p.ax, p.ay, p.bx, p.by));
      });
      CHECK(std::abs(diff) < 1e-12 * (1 + scale));
    }
  }
}

TEST_CASE("materialized rules match the streamed points") {
  for (PairCase kind : {PairCase::Identical, PairCase::CommonEdge,
                        PairCase::CommonVertex, PairCase::Disjoint}) {
    for (int q : {3, 24}) {
      PairRule direct = make_pair_rule(kind, q);
      const PairRule& cached = pair_rule(kind, q);
      REQUIRE(direct.pts.size() == cached.pts.size());
      for (size_t i = 0; i < direct.pts.size(); ++i) {
        CHECK(direct.pts[i].ax == cached.pts[i].ax);
        CHECK(direct.pts[i].ay == cached.pts[i].ay);
        CHECK(direct.pts[i].bx == cached.pts[i].bx);
        CHECK(direct.pts[i].by == cached.pts[i].by);
        CHECK(direct.pts[i].w == cached.pts[i].w);
      }
      size_t streamed = 0;
      for_each_pair_point(kind, q, [&](const PairPoint& p) {
        const PairPoint& m = direct.pts[streamed++];
        CHECK(p.ax == m.ax);
        CHECK(p.w == m.w);
      });
      CHECK(streamed == direct.pts.size());
    }
    // the small-order pool hands out stable storage
    CHECK(&pair_rule(kind, 3) == &pair_rule(kind, 3));
  }
}
