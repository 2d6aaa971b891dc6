#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>

namespace phishguard {

template <std::floating_point Scalar>
Scalar sigmoid(Scalar z) {
  using std::exp;
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
  const Scalar e = exp(z);
  return e / (Scalar(1) + e);
}

// log(1 + e^z) without overflow.
template <std::floating_point Scalar>
Scalar softplus(Scalar z) {
  using std::exp;
  using std::log1p;
  if (z > Scalar(0)) return z + log1p(exp(-z));
  return log1p(exp(z));
}

template <std::floating_point Scalar>
Scalar logit(Scalar p) {
  using std::log;
  return log(p / (Scalar(1) - p));
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  return z.unaryExpr([](typename Derived::Scalar v) { return sigmoid(v); });
}

template <typename Derived>
auto softplus(const Eigen::ArrayBase<Derived>& z) {
  return z.unaryExpr([](typename Derived::Scalar v) { return softplus(v); });
}

// Binary cross-entropy for one prediction; the clamp keeps log finite.
template <typename Scalar>
Scalar binary_cross_entropy(Scalar y, Scalar p) {
  using std::log;
  constexpr Scalar eps = Scalar(1e-15);
  const Scalar q = std::clamp(p, eps, Scalar(1) - eps);
  if (y == Scalar(1) && p == Scalar(1)) return Scalar(0);
  if (y == Scalar(0) && p == Scalar(0)) return Scalar(0);
  return -(y * log(q) + (Scalar(1) - y) * log(Scalar(1) - q));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  return std::clamp(a.dot(b) / (na * nb), Scalar(-1), Scalar(1));
}

}  // namespace phishguard
