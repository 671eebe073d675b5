#pragma once

#include <cmath>

#include <Eigen/Core>

namespace febe {

// forward-mode scalar with gradient over N seeded variables
template <int N>
struct Dual1 {
  double v = 0;
  Eigen::Matrix<double, N, 1> g = Eigen::Matrix<double, N, 1>::Zero();

  Dual1() = default;
  Dual1(double c) : v(c) {}
  static Dual1 var(double value, int idx) {
    Dual1 d(value);
    d.g(idx) = 1;
    return d;
  }
};

template <int N>
Dual1<N> operator+(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r(a.v + b.v);
  r.g = a.g + b.g;
  return r;
}
template <int N>
Dual1<N> operator-(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r(a.v - b.v);
  r.g = a.g - b.g;
  return r;
}
template <int N>
Dual1<N> operator-(const Dual1<N>& a) {
  Dual1<N> r(-a.v);
  r.g = -a.g;
  return r;
}
template <int N>
Dual1<N> operator*(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r(a.v * b.v);
  r.g = a.v * b.g + b.v * a.g;
  return r;
}
template <int N>
Dual1<N> operator*(double c, const Dual1<N>& a) {
  Dual1<N> r(c * a.v);
  r.g = c * a.g;
  return r;
}
template <int N>
Dual1<N> operator*(const Dual1<N>& a, double c) {
  return c * a;
}
template <int N>
Dual1<N> operator+(const Dual1<N>& a, double c) {
  Dual1<N> r = a;
  r.v += c;
  return r;
}
template <int N>
Dual1<N> operator+(double c, const Dual1<N>& a) {
  return a + c;
}
template <int N>
Dual1<N> operator-(const Dual1<N>& a, double c) {
  return a + (-c);
}
template <int N>
Dual1<N> operator-(double c, const Dual1<N>& a) {
  return (-a) + c;
}
template <int N>
Dual1<N> operator/(const Dual1<N>& a, const Dual1<N>& b) {
  Dual1<N> r(a.v / b.v);
  r.g = (a.g - r.v * b.g) / b.v;
  return r;
}
template <int N>
Dual1<N> operator/(const Dual1<N>& a, double c) {
  Dual1<N> r(a.v / c);
  r.g = a.g / c;
  return r;
}
template <int N>
Dual1<N> operator/(double c, const Dual1<N>& a) {
  Dual1<N> r(c / a.v);
  r.g = (-r.v / a.v) * a.g;
  return r;
}
template <int N>
Dual1<N> sqrt(const Dual1<N>& a) {
  double s = std::sqrt(a.v);
  Dual1<N> r(s);
  r.g = a.g / (2 * s);
  return r;
}

// forward-mode scalar carrying gradient and (symmetric) Hessian
template <int N>
struct Dual2 {
  double v = 0;
  Eigen::Matrix<double, N, 1> g = Eigen::Matrix<double, N, 1>::Zero();
  Eigen::Matrix<double, N, N> h = Eigen::Matrix<double, N, N>::Zero();

  Dual2() = default;
  Dual2(double c) : v(c) {}
  static Dual2 var(double value, int idx) {
    Dual2 d(value);
    d.g(idx) = 1;
    return d;
  }
};

template <int N>
Dual2<N> operator+(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v + b.v);
  r.g = a.g + b.g;
  r.h = a.h + b.h;
  return r;
}
template <int N>
Dual2<N> operator-(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v - b.v);
  r.g = a.g - b.g;
  r.h = a.h - b.h;
  return r;
}
template <int N>
Dual2<N> operator-(const Dual2<N>& a) {
  Dual2<N> r(-a.v);
  r.g = -a.g;
  r.h = -a.h;
  return r;
}
template <int N>
Dual2<N> operator*(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v * b.v);
  r.g = a.v * b.g + b.v * a.g;
  r.h = a.v * b.h + b.v * a.h;
  r.h.noalias() += a.g * b.g.transpose();
  r.h.noalias() += b.g * a.g.transpose();
  return r;
}
template <int N>
Dual2<N> operator*(double c, const Dual2<N>& a) {
  Dual2<N> r(c * a.v);
  r.g = c * a.g;
  r.h = c * a.h;
  return r;
}
template <int N>
Dual2<N> operator*(const Dual2<N>& a, double c) {
  return c * a;
}
template <int N>
Dual2<N> operator+(const Dual2<N>& a, double c) {
  Dual2<N> r = a;
  r.v += c;
  return r;
}
template <int N>
Dual2<N> operator+(double c, const Dual2<N>& a) {
  return a + c;
}
template <int N>
Dual2<N> operator-(const Dual2<N>& a, double c) {
  return a + (-c);
}
template <int N>
Dual2<N> operator-(double c, const Dual2<N>& a) {
  return (-a) + c;
}
template <int N>
Dual2<N> operator/(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v / b.v);
  r.g = (a.g - r.v * b.g) / b.v;
  r.h = a.h - r.v * b.h;
  r.h.noalias() -= r.g * b.g.transpose();
  r.h.noalias() -= b.g * r.g.transpose();
  r.h /= b.v;
  return r;
}
template <int N>
Dual2<N> operator/(const Dual2<N>& a, double c) {
  Dual2<N> r(a.v / c);
  r.g = a.g / c;
  r.h = a.h / c;
  return r;
}
template <int N>
Dual2<N> operator/(double c, const Dual2<N>& a) {
  Dual2<N> r(c / a.v);
  double iv = 1.0 / a.v;
  r.g = (-r.v * iv) * a.g;
  r.h = (-r.v * iv) * a.h;
  r.h.noalias() += (2 * r.v * iv * iv) * a.g * a.g.transpose();
  return r;
}
template <int N>
Dual2<N> sqrt(const Dual2<N>& a) {
  double s = std::sqrt(a.v);
  double d1 = 0.5 / s;
  double d2 = -0.25 / (a.v * s);
  Dual2<N> r(s);
  r.g = d1 * a.g;
  r.h = d1 * a.h;
  r.h.noalias() += d2 * (a.g * a.g.transpose());
  return r;
}

// plain-double shims so templated expressions work for all scalar types
inline double sqrt(double x) { return std::sqrt(x); }

}  // namespace febe
