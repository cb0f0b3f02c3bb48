// SPDX-License-Identifier: Apache-2.0
#pragma once

// Forward-mode dual numbers, generic over the underlying scalar. With
// S = double this is plain directional differentiation; with S = ad::Var the
// tangent arithmetic lands on a reverse-mode tape, which is how second-order
// terms (gradients of directional derivatives) are obtained.

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "paramflow/tape.hpp"

namespace pf::ad {

template <class S>
struct Dual {
  S v;  // primal
  S d;  // tangent
};

using DualScalar = Dual<double>;

template <class S>
Dual<S> operator+(Dual<S> a, Dual<S> b) {
  return {a.v + b.v, a.d + b.d};
}
template <class S>
Dual<S> operator-(Dual<S> a, Dual<S> b) {
  return {a.v - b.v, a.d - b.d};
}
template <class S>
Dual<S> operator*(Dual<S> a, Dual<S> b) {
  // product rule: (ab)' = a'b + ab'
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}

// mixing with the underlying scalar (zero tangent)
template <class S>
Dual<S> operator+(Dual<S> a, S b) {
  return {a.v + b, a.d};
}
template <class S>
Dual<S> operator+(S a, Dual<S> b) {
  return {a + b.v, b.d};
}
template <class S>
Dual<S> operator-(Dual<S> a, S b) {
  return {a.v - b, a.d};
}
template <class S>
Dual<S> operator-(S a, Dual<S> b) {
  return {a - b.v, b.d * -1.0};
}
template <class S>
Dual<S> operator*(Dual<S> a, S b) {
  return {a.v * b, a.d * b};
}
template <class S>
Dual<S> operator*(S a, Dual<S> b) {
  return {a * b.v, a * b.d};
}

// mixing with double immediates (no-op for S = double; folds to imm ops for Var)
inline Dual<Var> operator+(Dual<Var> a, double c) { return {a.v + c, a.d}; }
inline Dual<Var> operator-(Dual<Var> a, double c) { return {a.v - c, a.d}; }
inline Dual<Var> operator-(double c, Dual<Var> a) { return {c - a.v, a.d * -1.0}; }
inline Dual<Var> operator*(Dual<Var> a, double c) { return {a.v * c, a.d * c}; }
inline Dual<Var> operator*(double c, Dual<Var> a) { return a * c; }
inline Dual<Var> operator+(double c, Dual<Var> a) { return a + c; }

template <class S>
Dual<S> operator-(Dual<S> a) {
  return a * -1.0;
}

template <class S>
Dual<S> tanh(Dual<S> a) {
  S t = tanh(a.v);
  return {t, a.d * (1.0 - t * t)};
}
template <class S>
Dual<S> sigmoid(Dual<S> a) {
  S s = sigmoid(a.v);
  return {s, a.d * (s * (1.0 - s))};
}
template <class S>
Dual<S> relu(Dual<S> a) {
  return {relu(a.v), gate_positive(a.v, a.d)};
}
template <class S>
Dual<S> sin(Dual<S> a) {
  return {sin(a.v), a.d * cos(a.v)};
}
template <class S>
Dual<S> cos(Dual<S> a) {
  return {cos(a.v), a.d * (-1.0 * sin(a.v))};
}
template <class S>
Dual<S> exp(Dual<S> a) {
  S e = exp(a.v);
  return {e, a.d * e};
}
template <class S>
Dual<S> recip(Dual<S> a) {
  S r = recip(a.v);
  return {r, a.d * (-1.0 * r * r)};
}

template <class S>
Dual<S> sqr(Dual<S> a) {
  return {a.v * a.v, 2.0 * (a.v * a.d)};
}

// structural zero of the same scalar kind as ref
inline double zero_like(double) { return 0.0; }
inline Var zero_like(Var ref) { return ref * 0.0; }
template <class S>
Dual<S> zero_like(Dual<S> ref) {
  return {zero_like(ref.v), zero_like(ref.d)};
}

// tanh'(x) needs fixing for S=double: (1.0 - t*t) above already works since
// double supports the expression; Var supports it through imm ops.

// Directional derivative of f at `primal` along `tangent`:
//   returns (f(primal), d/de f(primal + e*tangent) at e=0).
inline std::pair<double, double> jvp(
    const std::function<DualScalar(std::span<const DualScalar>)>& f,
    std::span<const double> primal, std::span<const double> tangent) {
  if (primal.size() != tangent.size())
    throw std::invalid_argument("jvp: primal/tangent size mismatch");
  std::vector<DualScalar> xs(primal.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = {primal[i], tangent[i]};
  DualScalar y = f(xs);
  return {y.v, y.d};
}

}  // namespace pf::ad
