// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differential operators F[u] evaluated pointwise through the model's
// analytic derivatives. apply() always returns the right-hand side of the
// forward initial-value problem du/dt = F[u] the trainer integrates. For the
// HJB operator that problem lives in reversed time s = T - t, so the sign of
// the PDE-time equation d_t u = -eps Lap u + |grad u|^2 / 2 flips here:
// apply(hjb) = eps * Lap u - |grad u|^2 / 2.

#include <span>
#include <stdexcept>
#include <string>

#include "paramflow/model.hpp"

namespace pf::pde {

enum class OpKind { Heat, TanhFlux, Hjb };

struct OperatorSpec {
  OpKind kind = OpKind::Heat;
  double epsilon = 0.2;  // Hjb viscosity, > 0
  double speed = 2.0;    // TanhFlux flux scale
  // Hjb is posed backward in PDE time; trajectories run in s = T - t.
  bool time_reversed() const { return kind == OpKind::Hjb; }

  void validate() const {
    if (kind == OpKind::Hjb && !(epsilon > 0.0))
      throw std::invalid_argument("operator: hjb requires epsilon > 0");
    if (!(speed == speed) || speed > 1e12 || speed < -1e12)
      throw std::invalid_argument("operator: speed must be finite");
  }

  // derivative order the model must support
  int required_order() const { return kind == OpKind::TanhFlux ? 1 : 2; }
};

std::string op_name(OpKind k);
OpKind op_from_name(const std::string& s);

template <class S, class X>
S apply(const OperatorSpec& op, const rom::ModelSpec& ms, std::span<const S> th,
        std::span<const X> x) {
  using ad::tanh;
  switch (op.kind) {
    case OpKind::Heat:
      return rom::laplacian<S, X>(ms, th, x);
    case OpKind::TanhFlux: {
      // speed * d/dy tanh(u) summed over coordinates: speed * (1 - tanh(u)^2) * sum_j du/dx_j
      S u = rom::eval<S, X>(ms, th, x);
      std::vector<S> g(ms.d, u);
      rom::grad_x<S, X>(ms, th, x, g);
      S gs = g[0];
      for (int j = 1; j < ms.d; ++j) gs = gs + g[j];
      S t = tanh(u);
      return (1.0 - t * t) * gs * op.speed;
    }
    case OpKind::Hjb: {
      // forward (reversed-time) form: eps * Lap u - |grad u|^2 / 2
      S lap = rom::laplacian<S, X>(ms, th, x);
      std::vector<S> g(ms.d, lap);
      rom::grad_x<S, X>(ms, th, x, g);
      S q = g[0] * g[0];
      for (int j = 1; j < ms.d; ++j) q = q + g[j] * g[j];
      return lap * op.epsilon - q * 0.5;
    }
  }
  throw std::logic_error("operator: bad kind");
}

// Spatial gradient of F[u] (H1 training mode).
template <class S, class X>
void apply_grad_x(const OperatorSpec& op, const rom::ModelSpec& ms, std::span<const S> th,
                  std::span<const X> x, std::span<S> out) {
  using ad::tanh;
  const int d = ms.d;
  switch (op.kind) {
    case OpKind::Heat:
      rom::grad_x_laplacian<S, X>(ms, th, x, out);
      return;
    case OpKind::TanhFlux: {
      // d/dx_l [speed tanh'(u) sum_k du/dx_k]
      //   = speed [tanh''(u) du/dx_l sum_k du/dx_k + tanh'(u) sum_k H_lk]
      S u = rom::eval<S, X>(ms, th, x);
      std::vector<S> g(d, u);
      rom::grad_x<S, X>(ms, th, x, g);
      std::vector<S> H(std::size_t(d) * d, u);
      rom::hess_x<S, X>(ms, th, x, H);
      S gs = g[0];
      for (int j = 1; j < d; ++j) gs = gs + g[j];
      S t = tanh(u);
      S dt = 1.0 - t * t;
      S ddt = -2.0 * (t * dt);
      for (int l = 0; l < d; ++l) {
        S hs = H[std::size_t(l) * d];
        for (int k = 1; k < d; ++k) hs = hs + H[std::size_t(l) * d + k];
        out[l] = (ddt * g[l] * gs + dt * hs) * op.speed;
      }
      return;
    }
    case OpKind::Hjb: {
      // d/dx_l [eps Lap u - |grad u|^2/2] = eps d(Lap u)/dx_l - sum_k du/dx_k H_kl
      std::vector<S> gl(d, th[0]);
      rom::grad_x_laplacian<S, X>(ms, th, x, gl);
      std::vector<S> g(d, th[0]);
      rom::grad_x<S, X>(ms, th, x, g);
      std::vector<S> H(std::size_t(d) * d, th[0]);
      rom::hess_x<S, X>(ms, th, x, H);
      for (int l = 0; l < d; ++l) {
        S q = g[0] * H[std::size_t(0) * d + l];
        for (int k = 1; k < d; ++k) q = q + g[k] * H[std::size_t(k) * d + l];
        out[l] = gl[l] * op.epsilon - q;
      }
      return;
    }
  }
  throw std::logic_error("operator: bad kind");
}

double apply_d(const OperatorSpec& op, const rom::ModelSpec& ms, std::span<const double> th,
               std::span<const double> x);

}  // namespace pf::pde
