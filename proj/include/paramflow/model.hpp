// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reduced-order model families u_theta with analytic spatial derivatives.
//
// All evaluators are generic over the scalar type carried by theta (S) and by
// the spatial point (X): doubles for plain evaluation, tape Vars when the
// expression has to be differentiable in reverse mode, and Dual<Var> when a
// directional derivative in theta is itself part of a taped expression. The
// closed-form derivative formulas below are hand-derived per family and are
// cross-checked against the tape and against finite differences in the tests.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "paramflow/dual.hpp"
#include "paramflow/tape.hpp"

namespace pf::rom {

inline constexpr double kPi = std::numbers::pi;

enum class Family { SineModes, PeriodicSineTanh, GaussianMixture };

std::string family_name(Family f);
Family family_from_name(const std::string& s);

// Parameter layouts (flat vector offsets):
//   SineModes          [c_0..c_{n-1}]                      m = n
//   PeriodicSineTanh   [beta (d)][a (n*d)][b (n)][c (n)]   m = n*(d+2) + d
//   GaussianMixture    [w (n)][a (n*d)][b (n*d)]           m = n*(2d+1)
struct ModelSpec {
  Family family = Family::PeriodicSineTanh;
  int d = 1;
  int n = 1;
  std::vector<int> modes;  // SineModes only: n x d integer rows
  int layout_version = 1;

  int param_count() const {
    switch (family) {
      case Family::SineModes: return n;
      case Family::PeriodicSineTanh: return n * (d + 2) + d;
      case Family::GaussianMixture: return n * (2 * d + 1);
    }
    return 0;
  }

  // PeriodicSineTanh offsets
  int pst_beta() const { return 0; }
  int pst_a(int i) const { return d + i * d; }
  int pst_b(int i) const { return d + n * d + i; }
  int pst_c(int i) const { return d + n * d + n + i; }
  // GaussianMixture offsets
  int gm_w(int i) const { return i; }
  int gm_a(int i) const { return n + i * d; }
  int gm_b(int i) const { return n + n * d + i * d; }

  static ModelSpec sine_modes(int d, std::vector<int> modes_flat);
  static ModelSpec periodic_sine_tanh(int d, int n);
  static ModelSpec gaussian_mixture(int d, int n);
};

struct ParamVector {
  ModelSpec spec;
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(ModelSpec s) : spec(std::move(s)), values(spec.param_count(), 0.0) {}
  ParamVector(ModelSpec s, std::vector<double> v) : spec(std::move(s)), values(std::move(v)) {
    check();
  }
  void check() const {
    if (static_cast<int>(values.size()) != spec.param_count())
      throw std::invalid_argument("ParamVector: length " + std::to_string(values.size()) +
                                  " does not match layout (" +
                                  std::to_string(spec.param_count()) + ")");
  }
};

inline void check_sizes(const ModelSpec& ms, std::size_t th, std::size_t x) {
  if (static_cast<int>(th) != ms.param_count())
    throw std::invalid_argument("model: theta length mismatch");
  if (static_cast<int>(x) != ms.d) throw std::invalid_argument("model: point dimension mismatch");
}

// ---------------------------------------------------------------------------
// SineModes: u(x) = sum_i c_i sin(pi k_i . x), a linear family on integer
// lattice modes. Exact heat dynamics (c_i' = -pi^2 |k_i|^2 c_i) make it the
// workhorse for gradient and operator-recovery tests.
// ---------------------------------------------------------------------------

template <class S, class X>
S sine_eval(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  using ad::sin;
  const int d = ms.d, n = ms.n;
  auto phase = [&](int i) {
    X p = x[0] * (kPi * ms.modes[i * d]);
    for (int j = 1; j < d; ++j) p = p + x[j] * (kPi * ms.modes[i * d + j]);
    return p;
  };
  S u = th[0] * sin(phase(0));
  for (int i = 1; i < n; ++i) u = u + th[i] * sin(phase(i));
  return u;
}

template <class S, class X>
void sine_grad_x(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
                 std::span<S> out) {
  using ad::cos;
  const int d = ms.d, n = ms.n;
  for (int j = 0; j < d; ++j) {
    S acc = ad::zero_like(th[0]);
    for (int i = 0; i < n; ++i) {
      int kij = ms.modes[i * d + j];
      if (kij == 0) continue;
      X p = x[0] * (kPi * ms.modes[i * d]);
      for (int l = 1; l < d; ++l) p = p + x[l] * (kPi * ms.modes[i * d + l]);
      acc = acc + th[i] * ((kPi * kij) * cos(p));
    }
    out[j] = acc;
  }
}

template <class S, class X>
S sine_laplacian(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  using ad::sin;
  const int d = ms.d, n = ms.n;
  auto k2 = [&](int i) {
    double s = 0;
    for (int j = 0; j < d; ++j) s += double(ms.modes[i * d + j]) * ms.modes[i * d + j];
    return s;
  };
  auto phase = [&](int i) {
    X p = x[0] * (kPi * ms.modes[i * d]);
    for (int j = 1; j < d; ++j) p = p + x[j] * (kPi * ms.modes[i * d + j]);
    return p;
  };
  S u = th[0] * (-kPi * kPi * k2(0) * sin(phase(0)));
  for (int i = 1; i < n; ++i) u = u + th[i] * (-kPi * kPi * k2(i) * sin(phase(i)));
  return u;
}

// ---------------------------------------------------------------------------
// PeriodicSineTanh: u(x) = sum_i c_i tanh(a_i . sin(pi(x - beta)) - b_i).
// 2-periodic in every coordinate by construction. With
//   s_j = sin(pi(x_j - beta_j)), kap_j = cos(pi(x_j - beta_j)),
//   z_i = a_i . s - b_i, tau = tanh(z), tau' = 1 - tau^2, tau'' = -2 tau tau',
// the derivatives used below are
//   du/dx_j      = sum_i c_i tau_i' a_ij pi kap_j
//   d2u/dx_j^2   = sum_i c_i [tau_i'' (a_ij pi kap_j)^2 - tau_i' a_ij pi^2 s_j]
//   Lap u        = pi^2 sum_i c_i [tau_i'' Q_i - tau_i' R_i],
//                  Q_i = sum_j a_ij^2 kap_j^2, R_i = sum_j a_ij s_j
// ---------------------------------------------------------------------------

namespace detail {
template <class S, class X>
struct PstWork {
  std::vector<S> s, kap;  // sin / cos factors, length d (depend on beta)
  std::vector<S> tau, dtau, c;
};

template <class S, class X>
PstWork<S, X> pst_prepare(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  using ad::cos;
  using ad::sin;
  using ad::tanh;
  const int d = ms.d, n = ms.n;
  PstWork<S, X> w;
  w.s.reserve(d);
  w.kap.reserve(d);
  for (int j = 0; j < d; ++j) {
    S arg = x[j] * kPi - th[ms.pst_beta() + j] * kPi;
    w.s.push_back(sin(arg));
    w.kap.push_back(cos(arg));
  }
  w.tau.reserve(n);
  w.dtau.reserve(n);
  w.c.reserve(n);
  for (int i = 0; i < n; ++i) {
    S z = th[ms.pst_a(i)] * w.s[0];
    for (int j = 1; j < d; ++j) z = z + th[ms.pst_a(i) + j] * w.s[j];
    z = z - th[ms.pst_b(i)];
    S t = tanh(z);
    w.tau.push_back(t);
    w.dtau.push_back(1.0 - t * t);
    w.c.push_back(th[ms.pst_c(i)]);
  }
  return w;
}
}  // namespace detail

template <class S, class X>
S pst_eval(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  auto w = detail::pst_prepare(ms, th, x);
  S u = w.c[0] * w.tau[0];
  for (int i = 1; i < ms.n; ++i) u = u + w.c[i] * w.tau[i];
  return u;
}

template <class S, class X>
void pst_grad_x(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
                std::span<S> out) {
  auto w = detail::pst_prepare(ms, th, x);
  for (int j = 0; j < ms.d; ++j) {
    S acc = w.c[0] * w.dtau[0] * (th[ms.pst_a(0) + j] * (w.kap[j] * kPi));
    for (int i = 1; i < ms.n; ++i)
      acc = acc + w.c[i] * w.dtau[i] * (th[ms.pst_a(i) + j] * (w.kap[j] * kPi));
    out[j] = acc;
  }
}

template <class S, class X>
S pst_laplacian(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  auto w = detail::pst_prepare(ms, th, x);
  S acc = ad::zero_like(th[0]);
  for (int i = 0; i < ms.n; ++i) {
    S q = th[ms.pst_a(i)] * th[ms.pst_a(i)] * (w.kap[0] * w.kap[0]);
    S r = th[ms.pst_a(i)] * w.s[0];
    for (int j = 1; j < ms.d; ++j) {
      q = q + th[ms.pst_a(i) + j] * th[ms.pst_a(i) + j] * (w.kap[j] * w.kap[j]);
      r = r + th[ms.pst_a(i) + j] * w.s[j];
    }
    S ddtau = -2.0 * (w.tau[i] * w.dtau[i]);
    acc = acc + w.c[i] * (ddtau * q - w.dtau[i] * r) * (kPi * kPi);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// GaussianMixture: u(x) = sum_i w_i exp(-|a_i o (x - b_i)|^2 / 2).
// With r_j = x_j - b_ij and E_i the exponential factor:
//   du/dx_j    = sum_i w_i E_i (-a_ij^2 r_j)
//   d2u/dx_j^2 = sum_i w_i E_i (a_ij^4 r_j^2 - a_ij^2)
//   Lap u      = sum_i w_i E_i (P_i - A_i), P_i = sum_j a_ij^4 r_j^2,
//                A_i = sum_j a_ij^2
// ---------------------------------------------------------------------------

namespace detail {
template <class S, class X>
struct GmWork {
  std::vector<S> E;   // exponential factors, length n
  std::vector<S> r;   // x - b_i, n*d
  std::vector<S> a2;  // a_ij^2, n*d
};

template <class S, class X>
GmWork<S, X> gm_prepare(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  using ad::exp;
  const int d = ms.d, n = ms.n;
  GmWork<S, X> w;
  w.E.reserve(n);
  w.r.resize(std::size_t(n) * d, th[0]);
  w.a2.resize(std::size_t(n) * d, th[0]);
  for (int i = 0; i < n; ++i) {
    S rj0 = x[0] - th[ms.gm_b(i)];
    S aj0 = th[ms.gm_a(i)];
    S a20 = aj0 * aj0;
    w.r[std::size_t(i) * d] = rj0;
    w.a2[std::size_t(i) * d] = a20;
    S q = a20 * (rj0 * rj0);
    for (int j = 1; j < d; ++j) {
      S rj = x[j] - th[ms.gm_b(i) + j];
      S aj = th[ms.gm_a(i) + j];
      S a2 = aj * aj;
      w.r[std::size_t(i) * d + j] = rj;
      w.a2[std::size_t(i) * d + j] = a2;
      q = q + a2 * (rj * rj);
    }
    w.E.push_back(exp(q * -0.5));
  }
  return w;
}
}  // namespace detail

template <class S, class X>
S gm_eval(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  auto w = detail::gm_prepare(ms, th, x);
  S u = th[ms.gm_w(0)] * w.E[0];
  for (int i = 1; i < ms.n; ++i) u = u + th[ms.gm_w(i)] * w.E[i];
  return u;
}

template <class S, class X>
void gm_grad_x(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
               std::span<S> out) {
  auto w = detail::gm_prepare(ms, th, x);
  const int d = ms.d;
  for (int j = 0; j < d; ++j) {
    S acc = th[ms.gm_w(0)] * w.E[0] * (w.a2[j] * w.r[j] * -1.0);
    for (int i = 1; i < ms.n; ++i)
      acc = acc + th[ms.gm_w(i)] * w.E[i] * (w.a2[std::size_t(i) * d + j] *
                                             w.r[std::size_t(i) * d + j] * -1.0);
    out[j] = acc;
  }
}

template <class S, class X>
S gm_laplacian(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  auto w = detail::gm_prepare(ms, th, x);
  const int d = ms.d;
  S acc = ad::zero_like(th[0]);
  for (int i = 0; i < ms.n; ++i) {
    S p = w.a2[std::size_t(i) * d] * w.a2[std::size_t(i) * d] *
          (w.r[std::size_t(i) * d] * w.r[std::size_t(i) * d]);
    S a = w.a2[std::size_t(i) * d];
    for (int j = 1; j < d; ++j) {
      auto a2 = w.a2[std::size_t(i) * d + j];
      auto rj = w.r[std::size_t(i) * d + j];
      p = p + a2 * a2 * (rj * rj);
      a = a + a2;
    }
    acc = acc + th[ms.gm_w(i)] * w.E[i] * (p - a);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// family dispatch
// ---------------------------------------------------------------------------

template <class S, class X>
S eval(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  switch (ms.family) {
    case Family::SineModes: return sine_eval<S, X>(ms, th, x);
    case Family::PeriodicSineTanh: return pst_eval<S, X>(ms, th, x);
    case Family::GaussianMixture: return gm_eval<S, X>(ms, th, x);
  }
  throw std::logic_error("model: bad family");
}

template <class S, class X>
void grad_x(const ModelSpec& ms, std::span<const S> th, std::span<const X> x, std::span<S> out) {
  switch (ms.family) {
    case Family::SineModes: sine_grad_x<S, X>(ms, th, x, out); return;
    case Family::PeriodicSineTanh: pst_grad_x<S, X>(ms, th, x, out); return;
    case Family::GaussianMixture: gm_grad_x<S, X>(ms, th, x, out); return;
  }
  throw std::logic_error("model: bad family");
}

template <class S, class X>
S laplacian(const ModelSpec& ms, std::span<const S> th, std::span<const X> x) {
  switch (ms.family) {
    case Family::SineModes: return sine_laplacian<S, X>(ms, th, x);
    case Family::PeriodicSineTanh: return pst_laplacian<S, X>(ms, th, x);
    case Family::GaussianMixture: return gm_laplacian<S, X>(ms, th, x);
  }
  throw std::logic_error("model: bad family");
}

// spatial Hessian and gradient of the Laplacian (H1 training mode), plus the
// full parameter gradient; double-only declarations live in model.cpp are not
// enough because the trainer needs tape instantiations, so these stay generic.

template <class S, class X>
void hess_x(const ModelSpec& ms, std::span<const S> th, std::span<const X> x, std::span<S> out);

template <class S, class X>
void grad_x_laplacian(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
                      std::span<S> out);

template <class S, class X>
void grad_theta(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
                std::span<S> out);

// double-path conveniences
double eval_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x);
void grad_x_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x,
              std::span<double> out);
double laplacian_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x);
void grad_theta_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x,
                  std::span<double> out);

// ---- generic definitions for the remaining derivatives ----

template <class S, class X>
void hess_x(const ModelSpec& ms, std::span<const S> th, std::span<const X> x, std::span<S> out) {
  using ad::sin;
  const int d = ms.d, n = ms.n;
  check_sizes(ms, th.size(), x.size());
  switch (ms.family) {
    case Family::SineModes: {
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          S acc = ad::zero_like(th[0]);
          for (int i = 0; i < n; ++i) {
            double coef = -kPi * kPi * ms.modes[i * d + j] * ms.modes[i * d + k];
            if (coef == 0.0) continue;
            X p = x[0] * (kPi * ms.modes[i * d]);
            for (int l = 1; l < d; ++l) p = p + x[l] * (kPi * ms.modes[i * d + l]);
            acc = acc + th[i] * (coef * sin(p));
          }
          out[std::size_t(j) * d + k] = acc;
        }
      return;
    }
    case Family::PeriodicSineTanh: {
      auto w = detail::pst_prepare(ms, th, x);
      for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) {
          S acc = ad::zero_like(th[0]);
          for (int i = 0; i < n; ++i) {
            S dj = th[ms.pst_a(i) + j] * (w.kap[j] * kPi);
            S ddtau = -2.0 * (w.tau[i] * w.dtau[i]);
            S term = (j == k)
                         ? w.c[i] * (ddtau * (dj * dj) -
                                     w.dtau[i] * (th[ms.pst_a(i) + j] * (w.s[j] * (kPi * kPi))))
                         : w.c[i] * (ddtau * (dj * (th[ms.pst_a(i) + k] * (w.kap[k] * kPi))));
            acc = acc + term;
          }
          out[std::size_t(j) * d + k] = acc;
          if (k != j) out[std::size_t(k) * d + j] = acc;
        }
      return;
    }
    case Family::GaussianMixture: {
      auto w = detail::gm_prepare(ms, th, x);
      for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) {
          S acc = ad::zero_like(th[0]);
          for (int i = 0; i < n; ++i) {
            auto a2j = w.a2[std::size_t(i) * d + j];
            auto rj = w.r[std::size_t(i) * d + j];
            S term = (j == k)
                         ? th[ms.gm_w(i)] * w.E[i] * (a2j * a2j * (rj * rj) - a2j)
                         : th[ms.gm_w(i)] * w.E[i] *
                               (a2j * rj * (w.a2[std::size_t(i) * d + k] *
                                            w.r[std::size_t(i) * d + k]));
            acc = acc + term;
          }
          out[std::size_t(j) * d + k] = acc;
          if (k != j) out[std::size_t(k) * d + j] = acc;
        }
      return;
    }
  }
  throw std::logic_error("model: bad family");
}

template <class S, class X>
void grad_x_laplacian(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
                      std::span<S> out) {
  using ad::cos;
  const int d = ms.d, n = ms.n;
  check_sizes(ms, th.size(), x.size());
  switch (ms.family) {
    case Family::SineModes: {
      for (int l = 0; l < d; ++l) {
        S acc = ad::zero_like(th[0]);
        for (int i = 0; i < n; ++i) {
          double k2 = 0;
          for (int j = 0; j < d; ++j) k2 += double(ms.modes[i * d + j]) * ms.modes[i * d + j];
          double coef = -kPi * kPi * kPi * k2 * ms.modes[i * d + l];
          if (coef == 0.0) continue;
          X p = x[0] * (kPi * ms.modes[i * d]);
          for (int j = 1; j < d; ++j) p = p + x[j] * (kPi * ms.modes[i * d + j]);
          acc = acc + th[i] * (coef * cos(p));
        }
        out[l] = acc;
      }
      return;
    }
    case Family::PeriodicSineTanh: {
      // d/dx_l Lap u with tau''' = tau'(6 tau^2 - 2),
      //   dQ/dx_l = -2 pi a_il^2 kap_l s_l, dR/dx_l = pi a_il kap_l
      auto w = detail::pst_prepare(ms, th, x);
      for (int l = 0; l < d; ++l) {
        S acc = ad::zero_like(th[0]);
        for (int i = 0; i < n; ++i) {
          S q = th[ms.pst_a(i)] * th[ms.pst_a(i)] * (w.kap[0] * w.kap[0]);
          S r = th[ms.pst_a(i)] * w.s[0];
          for (int j = 1; j < d; ++j) {
            q = q + th[ms.pst_a(i) + j] * th[ms.pst_a(i) + j] * (w.kap[j] * w.kap[j]);
            r = r + th[ms.pst_a(i) + j] * w.s[j];
          }
          S dl = th[ms.pst_a(i) + l] * (w.kap[l] * kPi);
          S tau = w.tau[i], dtau = w.dtau[i];
          S ddtau = -2.0 * (tau * dtau);
          S dddtau = dtau * (6.0 * (tau * tau) - 2.0);
          S dq = th[ms.pst_a(i) + l] * th[ms.pst_a(i) + l] * (w.kap[l] * w.s[l] * (-2.0 * kPi));
          S dr = th[ms.pst_a(i) + l] * (w.kap[l] * kPi);
          acc = acc + w.c[i] * (dddtau * dl * q + ddtau * dq - ddtau * dl * r - dtau * dr) *
                          (kPi * kPi);
        }
        out[l] = acc;
      }
      return;
    }
    case Family::GaussianMixture: {
      // d/dx_l Lap u = sum_i w_i E_i [(-a_il^2 r_l)(P_i - A_i) + 2 a_il^4 r_l]
      auto w = detail::gm_prepare(ms, th, x);
      for (int l = 0; l < d; ++l) {
        S acc = ad::zero_like(th[0]);
        for (int i = 0; i < n; ++i) {
          S p = w.a2[std::size_t(i) * d] * w.a2[std::size_t(i) * d] *
                (w.r[std::size_t(i) * d] * w.r[std::size_t(i) * d]);
          S a = w.a2[std::size_t(i) * d];
          for (int j = 1; j < d; ++j) {
            auto a2 = w.a2[std::size_t(i) * d + j];
            auto rj = w.r[std::size_t(i) * d + j];
            p = p + a2 * a2 * (rj * rj);
            a = a + a2;
          }
          auto a2l = w.a2[std::size_t(i) * d + l];
          auto rl = w.r[std::size_t(i) * d + l];
          acc = acc + th[ms.gm_w(i)] * w.E[i] *
                          (a2l * rl * -1.0 * (p - a) + 2.0 * (a2l * a2l * rl));
        }
        out[l] = acc;
      }
      return;
    }
  }
  throw std::logic_error("model: bad family");
}

template <class S, class X>
void grad_theta(const ModelSpec& ms, std::span<const S> th, std::span<const X> x,
                std::span<S> out) {
  using ad::sin;
  const int d = ms.d, n = ms.n;
  check_sizes(ms, th.size(), x.size());
  switch (ms.family) {
    case Family::SineModes: {
      for (int i = 0; i < n; ++i) {
        X p = x[0] * (kPi * ms.modes[i * d]);
        for (int j = 1; j < d; ++j) p = p + x[j] * (kPi * ms.modes[i * d + j]);
        out[i] = ad::zero_like(th[0]) + sin(p);  // lift pure-x value into S
      }
      return;
    }
    case Family::PeriodicSineTanh: {
      auto w = detail::pst_prepare(ms, th, x);
      // du/dbeta_j = -pi kap_j sum_i c_i tau_i' a_ij
      for (int j = 0; j < d; ++j) {
        S acc = w.c[0] * w.dtau[0] * th[ms.pst_a(0) + j];
        for (int i = 1; i < n; ++i) acc = acc + w.c[i] * w.dtau[i] * th[ms.pst_a(i) + j];
        out[ms.pst_beta() + j] = acc * (w.kap[j] * (-kPi));
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j)
          out[ms.pst_a(i) + j] = w.c[i] * w.dtau[i] * w.s[j];  // du/da_ij
        out[ms.pst_b(i)] = w.c[i] * w.dtau[i] * -1.0;          // du/db_i
        out[ms.pst_c(i)] = w.tau[i];                           // du/dc_i
      }
      return;
    }
    case Family::GaussianMixture: {
      auto w = detail::gm_prepare(ms, th, x);
      for (int i = 0; i < n; ++i) {
        out[ms.gm_w(i)] = w.E[i];  // du/dw_i
        for (int j = 0; j < d; ++j) {
          auto rj = w.r[std::size_t(i) * d + j];
          S aj = th[ms.gm_a(i) + j];
          // du/da_ij = -w E a_ij r_j^2 ; du/db_ij = w E a_ij^2 r_j
          out[ms.gm_a(i) + j] = th[ms.gm_w(i)] * w.E[i] * (aj * (rj * rj)) * -1.0;
          out[ms.gm_b(i) + j] =
              th[ms.gm_w(i)] * w.E[i] * (w.a2[std::size_t(i) * d + j] * rj);
        }
      }
      return;
    }
  }
  throw std::logic_error("model: bad family");
}

}  // namespace pf::rom
