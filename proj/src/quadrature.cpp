#include "febe/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

namespace febe {

namespace {
std::mutex g_mutex;
std::map<int, GaussRule1D> g_gauss;
std::map<int, TensorRule> g_tensor;
std::map<std::pair<int, int>, PairRule> g_pair;
constexpr int kPairCacheMaxOrder = 14;
}  // namespace

const GaussRule1D& gauss01(int q) {
  if (q < 1 || q > 100) throw Error("Gauss order out of range");
  std::lock_guard<std::mutex> lock(g_mutex);
  auto it = g_gauss.find(q);
  if (it != g_gauss.end()) return it->second;
  GaussRule1D r;
  if (q == 1) {
    r.x = Eigen::VectorXd::Constant(1, 0.5);
    r.w = Eigen::VectorXd::Constant(1, 1.0);
  } else {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(q, q);
    for (int k = 1; k < q; ++k) {
      double b = k / std::sqrt(4.0 * k * k - 1.0);
      J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    r.x.resize(q);
    r.w.resize(q);
    for (int i = 0; i < q; ++i) {
      r.x(i) = (es.eigenvalues()(i) + 1.0) / 2.0;
      double v0 = es.eigenvectors()(0, i);
      r.w(i) = v0 * v0;  // 2*v0^2 on [-1,1], halved by the affine map
    }
  }
  return g_gauss.emplace(q, std::move(r)).first->second;
}

const TensorRule& tensor01(int q) {
  const GaussRule1D& g = gauss01(q);
  std::lock_guard<std::mutex> lock(g_mutex);
  auto it = g_tensor.find(q);
  if (it != g_tensor.end()) return it->second;
  TensorRule t;
  t.u.resize(q * q);
  t.v.resize(q * q);
  t.w.resize(q * q);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < q; ++i) {
      int a = j * q + i;
      t.u(a) = g.x(i);
      t.v(a) = g.x(j);
      t.w(a) = g.w(i) * g.w(j);
    }
  return g_tensor.emplace(q, std::move(t)).first->second;
}

PairRule make_pair_rule(PairCase kind, int q) {
  PairRule r;
  size_t sub = kind == PairCase::Identical    ? 8
               : kind == PairCase::CommonEdge ? 6
               : kind == PairCase::CommonVertex ? 4
                                                : 1;
  r.pts.reserve(sub * (size_t)q * q * q * q);
  for_each_pair_point(kind, q, [&](const PairPoint& p) { r.pts.push_back(p); });
  return r;
}

const PairRule& pair_rule(PairCase kind, int q) {
  if (q < 1) throw Error("quadrature order must be positive");
  if (q <= kPairCacheMaxOrder) {
    auto key = std::make_pair((int)kind, q);
    {
      std::lock_guard<std::mutex> lock(g_mutex);
      auto it = g_pair.find(key);
      if (it != g_pair.end()) return it->second;
    }
    PairRule built = make_pair_rule(kind, q);  // gauss01 locks internally
    std::lock_guard<std::mutex> lock(g_mutex);
    return g_pair.emplace(key, std::move(built)).first->second;
  }
  thread_local PairRule scratch;
  thread_local std::pair<int, int> scratch_key{-1, -1};
  auto key = std::make_pair((int)kind, q);
  if (scratch_key != key) {
    scratch = make_pair_rule(kind, q);
    scratch_key = key;
  }
  return scratch;
}

}  // namespace febe
