// SPDX-License-Identifier: Apache-2.0
#pragma once

// The learned control field over parameter space
//   V(theta) = phi_s(theta) * (phi_r(theta) + phi_e(theta) o theta)
// with a sigmoid feed-forward gate phi_s : R^m -> (0,1), a ReLU ResNet
// phi_r : R^m -> R^m and a ReLU feed-forward phi_e : R^m -> R^m. Evaluation is
// generic over the scalar type so the same code path builds tape graphs for
// training; field_vjp is an independent hand-rolled reverse pass used for
// cross-checks and lightweight gradient needs.

#include <span>
#include <stdexcept>
#include <vector>

#include "paramflow/dual.hpp"
#include "paramflow/tape.hpp"
#include "paramflow/util.hpp"

namespace pf::ctrl {

struct ControlNetSpec {
  int m = 1;      // field input/output dimension
  int width = 64;
  int depth = 3;  // hidden layers (gate, phi_e) / residual blocks (phi_r)

  void validate() const {
    if (m < 1 || width < 1 || depth < 1)
      throw std::invalid_argument("control: m, width, depth must be >= 1");
  }
  int param_count() const;
  int gate_count() const;  // xi_s block size (first in the flat layout)
  int res_count() const;   // xi_r block size (second)
  int mlp_count() const;   // xi_e block size (third)
};

// One dense layer inside the flat parameter vector: W is rows x cols
// row-major at [w_off, w_off + rows*cols), bias at [b_off, b_off + rows).
struct LayerRef {
  int w_off = 0, b_off = 0, rows = 0, cols = 0;
};

// Resolved offsets for the three sub-networks; layout order is
// [xi_s | xi_r | xi_e], matching the checkpoint format.
struct ControlLayout {
  explicit ControlLayout(const ControlNetSpec& s);
  std::vector<LayerRef> gate;             // depth layers, widths m->w->...->w
  LayerRef gate_head;                     // w -> 1
  LayerRef res_in;                        // m -> w
  std::vector<LayerRef> res_w1, res_w2;   // depth blocks, w -> w each
  LayerRef res_out;                       // w -> m
  std::vector<LayerRef> mlp;              // depth layers, m->w->...->w
  LayerRef mlp_out;                       // w -> m
  int total = 0;
};

struct ControlParams {
  ControlNetSpec spec;
  std::vector<double> values;

  ControlParams() = default;
  explicit ControlParams(ControlNetSpec s) : spec(s), values(s.param_count(), 0.0) {}
};

// He fan-in init for ReLU layers, Xavier for the sigmoid gate and linear
// embeddings; residual-branch and phi_e output layers start at zero so the
// initial field is a gated linear map.
ControlParams init_params(const ControlNetSpec& spec, Rng& rng);

// ---- scalar-generic evaluation ----

enum class Act { None, Relu, Sigmoid };

namespace detail {

template <class S>
S apply_act(S v, Act a) {
  using ad::relu;
  using ad::sigmoid;
  switch (a) {
    case Act::None: return v;
    case Act::Relu: return relu(v);
    case Act::Sigmoid: return sigmoid(v);
  }
  return v;
}

// Contiguity-aware dot products. The Var overload fuses a whole row into one
// tape node when both ranges are contiguous (always true for slot-backed
// weights and stage-ordered layer outputs).
inline bool contiguous(std::span<const ad::Var> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i].id != v[0].id + i) return false;
  return true;
}

template <class S>
S sdot(std::span<const S> a, std::span<const S> b) {
  S acc = a[0] * b[0];
  for (std::size_t k = 1; k < a.size(); ++k) acc = acc + a[k] * b[k];
  return acc;
}

inline ad::Var sdot(std::span<const ad::Var> a, std::span<const ad::Var> b) {
  if (contiguous(a) && contiguous(b))
    return a[0].tb->dot_ranges(a[0].id, b[0].id, static_cast<std::uint32_t>(a.size()));
  return a[0].tb->dot_pairs(a, b);
}

// out = act(W x + b); three passes keep tape layer outputs contiguous
template <class S>
void dense(std::span<const S> xi, const LayerRef& ly, std::span<const S> x, Act a,
           std::vector<S>& out) {
  std::vector<S> pre;
  pre.reserve(ly.rows);
  for (int j = 0; j < ly.rows; ++j)
    pre.push_back(sdot(xi.subspan(ly.w_off + std::size_t(j) * ly.cols, ly.cols), x));
  for (int j = 0; j < ly.rows; ++j) pre[j] = pre[j] + xi[ly.b_off + j];
  out.clear();
  out.reserve(ly.rows);
  for (int j = 0; j < ly.rows; ++j) out.push_back(apply_act(pre[j], a));
}

}  // namespace detail

template <class S>
std::vector<S> eval_field(const ControlNetSpec& spec, std::span<const S> xi,
                          std::span<const S> theta) {
  spec.validate();
  if (static_cast<int>(xi.size()) != spec.param_count() ||
      static_cast<int>(theta.size()) != spec.m)
    throw std::invalid_argument("control: dimension mismatch in eval_field");
  const ControlLayout L(spec);

  // gate
  std::vector<S> h(theta.begin(), theta.end()), tmp;
  for (const auto& ly : L.gate) {
    detail::dense(xi, ly, std::span<const S>(h), Act::Sigmoid, tmp);
    h.swap(tmp);
  }
  S gate = detail::apply_act(
      detail::sdot(xi.subspan(L.gate_head.w_off, L.gate_head.cols), std::span<const S>(h)) +
          xi[L.gate_head.b_off],
      Act::Sigmoid);

  // ReLU ResNet: linear embed, depth residual blocks, linear out
  std::vector<S> y;
  detail::dense(xi, L.res_in, theta, Act::None, y);
  std::vector<S> t, z;
  for (int l = 0; l < spec.depth; ++l) {
    detail::dense(xi, L.res_w1[l], std::span<const S>(y), Act::Relu, t);
    // y <- y + W2 t + b2, staged so the updated y stays contiguous on tape
    z.clear();
    z.reserve(spec.width);
    for (int j = 0; j < spec.width; ++j)
      z.push_back(detail::sdot(
          xi.subspan(L.res_w2[l].w_off + std::size_t(j) * spec.width, spec.width),
          std::span<const S>(t)));
    for (int j = 0; j < spec.width; ++j) z[j] = z[j] + xi[L.res_w2[l].b_off + j];
    for (int j = 0; j < spec.width; ++j) z[j] = z[j] + y[j];
    y.swap(z);
  }
  std::vector<S> r;
  detail::dense(xi, L.res_out, std::span<const S>(y), Act::None, r);

  // phi_e MLP
  std::vector<S> e(theta.begin(), theta.end());
  for (const auto& ly : L.mlp) {
    detail::dense(xi, ly, std::span<const S>(e), Act::Relu, tmp);
    e.swap(tmp);
  }
  detail::dense(xi, L.mlp_out, std::span<const S>(e), Act::None, tmp);
  e.swap(tmp);

  std::vector<S> v;
  v.reserve(spec.m);
  for (int j = 0; j < spec.m; ++j) v.push_back(gate * (r[j] + e[j] * theta[j]));
  return v;
}

std::vector<double> eval_field_d(const ControlParams& xi, std::span<const double> theta);

// Pullbacks a^T dV/dtheta and a^T dV/dxi from one hand-written reverse pass.
void field_vjp(const ControlParams& xi, std::span<const double> theta,
               std::span<const double> cotangent, std::span<double> dtheta,
               std::span<double> dxi);

}  // namespace pf::ctrl
