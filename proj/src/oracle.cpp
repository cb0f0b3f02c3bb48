// SPDX-License-Identifier: Apache-2.0
#include "paramflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pf::oracle {

namespace {
constexpr double kPi = std::numbers::pi;
}

McEstimate heat_exact(const rom::TargetFn& g, std::span<const double> x, double t, int n_mc,
                      Rng& rng) {
  if (n_mc < 1) throw std::invalid_argument("heat_exact: n_mc must be >= 1");
  const int d = static_cast<int>(x.size());
  if (t <= 0.0) return {g(x), 0.0};
  const double s = std::sqrt(2.0 * t);
  std::vector<double> y(d);
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < n_mc; ++k) {
    for (int j = 0; j < d; ++j) y[j] = x[j] + s * normal(rng);
    double v = g(y);
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n_mc;
  double var = std::max(0.0, sumsq / n_mc - mean * mean);
  return {mean, std::sqrt(var / n_mc)};
}

double heat_mode_exact(std::span<const int> k, double amplitude, std::span<const double> x,
                       double t) {
  double k2 = 0.0, phase = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    k2 += double(k[j]) * k[j];
    phase += kPi * k[j] * x[j];
  }
  return amplitude * std::exp(-kPi * kPi * k2 * t) * std::sin(phase);
}

HeatSpectral::HeatSpectral(const rom::TargetFn& g, int d, int max_mode, int grid_n)
    : d_(d), k_(max_mode), nk_(2 * max_mode + 1) {
  if (d < 1 || d > 3) throw std::invalid_argument("spectral oracle supports d in {1,2,3}");
  if (grid_n < 2 * max_mode + 2)
    throw std::invalid_argument("spectral oracle: grid too coarse for requested modes");
  const int N = grid_n;
  const std::complex<double> I(0.0, 1.0);

  // sample g on the tensor grid
  std::vector<double> grid(static_cast<std::size_t>(std::pow(N, d)));
  std::vector<double> x(d);
  std::vector<int> idx(d, 0);
  for (std::size_t flat = 0; flat < grid.size(); ++flat) {
    std::size_t rem = flat;
    for (int j = d - 1; j >= 0; --j) {
      idx[j] = rem % N;
      rem /= N;
    }
    for (int j = 0; j < d; ++j) x[j] = -1.0 + 2.0 * idx[j] / N;
    grid[flat] = g(x);
  }

  // per-axis twiddle table: e^{-i pi k x_j}, k in [-K, K]
  std::vector<std::complex<double>> tw(std::size_t(nk_) * N);
  for (int k = -k_; k <= k_; ++k)
    for (int j = 0; j < N; ++j)
      tw[std::size_t(k + k_) * N + j] = std::exp(-I * (kPi * k * (-1.0 + 2.0 * j / N)));

  // separable transform, one axis at a time
  std::vector<std::complex<double>> cur(grid.begin(), grid.end());
  std::vector<int> shape(d, N);
  for (int axis = 0; axis < d; ++axis) {
    std::size_t before = 1, after = 1;
    for (int j = 0; j < axis; ++j) before *= shape[j];
    for (int j = axis + 1; j < d; ++j) after *= shape[j];
    std::vector<std::complex<double>> nxt(before * nk_ * after);
    for (std::size_t b = 0; b < before; ++b)
      for (int k = 0; k < nk_; ++k)
        for (std::size_t a = 0; a < after; ++a) {
          std::complex<double> acc(0.0, 0.0);
          const std::complex<double>* twk = tw.data() + std::size_t(k) * N;
          for (int j = 0; j < N; ++j)
            acc += twk[j] * cur[(b * shape[axis] + j) * after + a];
          nxt[(b * nk_ + k) * after + a] = acc / double(N);
        }
    cur = std::move(nxt);
    shape[axis] = nk_;
  }
  coef_ = std::move(cur);
}

double HeatSpectral::value(std::span<const double> x, double t) const {
  const std::complex<double> I(0.0, 1.0);
  // per-axis phases e^{+i pi k x_j} built by recurrence
  std::vector<std::complex<double>> ph(std::size_t(d_) * nk_);
  for (int j = 0; j < d_; ++j) {
    std::complex<double> step = std::exp(I * (kPi * x[j]));
    std::complex<double> v = std::exp(-I * (kPi * double(k_) * x[j]));
    for (int k = 0; k < nk_; ++k) {
      ph[std::size_t(j) * nk_ + k] = v;
      v *= step;
    }
  }
  std::complex<double> acc(0.0, 0.0);
  std::vector<int> kidx(d_, 0);
  for (std::size_t flat = 0; flat < coef_.size(); ++flat) {
    std::size_t rem = flat;
    double k2 = 0.0;
    std::complex<double> phase(1.0, 0.0);
    for (int j = d_ - 1; j >= 0; --j) {
      int kj = int(rem % nk_) - k_;
      rem /= nk_;
      k2 += double(kj) * kj;
      phase *= ph[std::size_t(j) * nk_ + (kj + k_)];
    }
    acc += coef_[flat] * phase * std::exp(-kPi * kPi * k2 * t);
  }
  return acc.real();
}

UpwindSolution upwind_1d(const std::function<double(double)>& g1, double T, int n_t, int n_x,
                         double speed) {
  if (n_t < 1 || n_x < 2) throw std::invalid_argument("upwind: need n_t >= 1, n_x >= 2");
  const double dy = 2.0 / n_x;
  const double dt = T / n_t;
  // flux f(u) = speed * tanh(u), f' = speed * (1 - tanh^2) in (0, speed]
  if (dt * std::abs(speed) > dy) {
    int need = static_cast<int>(std::ceil(T * std::abs(speed) / dy));
    throw std::invalid_argument("upwind: CFL violated, need n_t >= " + std::to_string(need));
  }
  UpwindSolution sol;
  sol.T = T;
  sol.nt_ = n_t;
  sol.nx_ = n_x;
  sol.u.resize(std::size_t(n_t + 1) * n_x);
  for (int i = 0; i < n_x; ++i) sol.u[i] = g1(-1.0 + i * dy);

  std::vector<double> flux(n_x);
  for (int k = 0; k < n_t; ++k) {
    const double* un = sol.u.data() + std::size_t(k) * n_x;
    double* up = sol.u.data() + std::size_t(k + 1) * n_x;
    for (int i = 0; i < n_x; ++i) flux[i] = speed * std::tanh(un[i]);
    // u_i^{n+1} = u_i + (dt/dy) (f(u_{i+1}) - f(u_i)); with f' >= 0 this is
    // the monotone donor-cell update for the leftward-moving characteristics
    for (int i = 0; i < n_x; ++i) {
      int ip = (i + 1 == n_x) ? 0 : i + 1;
      up[i] = un[i] + dt / dy * (flux[ip] - flux[i]);
    }
  }
  return sol;
}

double UpwindSolution::value(double t, double y) const {
  const double dt = T / nt_, dy = 2.0 / nx_;
  double ts = std::clamp(t, 0.0, T) / dt;
  int k = std::min(static_cast<int>(ts), nt_ - 1);
  double a = ts - k;
  // wrap y into [-1, 1)
  double yy = std::fmod(y + 1.0, 2.0);
  if (yy < 0) yy += 2.0;
  double is = yy / dy;
  int i = std::min(static_cast<int>(is), nx_ - 1);
  double b = is - i;
  int ip = (i + 1 == nx_) ? 0 : i + 1;
  auto at = [&](int row, int col) { return u[std::size_t(row) * nx_ + col]; };
  double v0 = (1 - b) * at(k, i) + b * at(k, ip);
  double v1 = (1 - b) * at(k + 1, i) + b * at(k + 1, ip);
  return (1 - a) * v0 + a * v1;
}

double UpwindSolution::total_variation(int row) const {
  const double* r = u.data() + std::size_t(row) * nx_;
  double tv = 0.0;
  for (int i = 0; i < nx_; ++i) {
    int ip = (i + 1 == nx_) ? 0 : i + 1;
    tv += std::abs(r[ip] - r[i]);
  }
  return tv;
}

double UpwindSolution::integral(int row) const {
  const double* r = u.data() + std::size_t(row) * nx_;
  double s = 0.0;
  for (int i = 0; i < nx_; ++i) s += r[i];
  return s * (2.0 / nx_);
}

double cole_hopf(const rom::TargetFn& g, std::span<const double> x, double t, double T,
                 double eps, int n_mc, Rng& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("cole_hopf: eps must be > 0");
  if (t > T || t < 0.0) throw std::invalid_argument("cole_hopf: need 0 <= t <= T");
  if (t == T) return g(x);
  if (n_mc < 1) throw std::invalid_argument("cole_hopf: n_mc must be >= 1");
  const int d = static_cast<int>(x.size());
  const double s = std::sqrt(2.0 * eps * (T - t));
  std::vector<double> y(d);
  std::vector<double> expo(n_mc);
  double mx = -1e300;
  for (int k = 0; k < n_mc; ++k) {
    for (int j = 0; j < d; ++j) y[j] = x[j] + s * normal(rng);
    expo[k] = -g(y) / (2.0 * eps);
    mx = std::max(mx, expo[k]);
  }
  double acc = 0.0;
  for (int k = 0; k < n_mc; ++k) acc += std::exp(expo[k] - mx);
  // -2 eps * (log-mean-exp), with the max shifted out for stability
  return -2.0 * eps * (mx + std::log(acc / n_mc));
}

std::vector<ErrPoint> relative_error_curve(const rom::ModelSpec& ms, const ode::Trajectory& tr,
                                           const SpaceTimeFn& oracle,
                                           const rom::DomainSampler& dom,
                                           std::span<const double> tgrid, int n_mc, Rng& rng) {
  const int m = ms.param_count();
  const int d = ms.d;
  if (tr.dim != m && tr.dim != m + 1)
    throw std::invalid_argument("error curve: trajectory state dimension does not match model");
  std::vector<ErrPoint> out;
  std::vector<double> state(tr.dim), pts(std::size_t(n_mc) * d), wts(n_mc);
  for (double t : tgrid) {
    tr.state_at(t, state);
    std::span<const double> theta(state.data(), m);
    rom::sample_domain(dom, ms, theta, n_mc, rng, pts, wts);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < n_mc; ++k) {
      auto x = std::span<const double>(pts).subspan(std::size_t(k) * d, d);
      double um = rom::eval<double, double>(ms, theta, x);
      double us = oracle(x, t);
      num += wts[k] * (um - us) * (um - us);
      den += wts[k] * us * us;
    }
    ErrPoint pt;
    pt.t = t;
    if (den / n_mc < 1e-12) {
      pt.valid = false;  // oracle norm below floor; ratio would be meaningless
      pt.rel = 0.0;
    } else {
      pt.rel = std::sqrt(num / den);
    }
    out.push_back(pt);
  }
  return out;
}

CurveStats aggregate_curves(const std::vector<std::vector<ErrPoint>>& curves) {
  CurveStats st;
  if (curves.empty()) return st;
  const std::size_t nt = curves.front().size();
  st.t.resize(nt);
  st.mean.assign(nt, 0.0);
  st.stddev.assign(nt, 0.0);
  st.count.assign(nt, 0);
  for (std::size_t i = 0; i < nt; ++i) st.t[i] = curves.front()[i].t;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < nt; ++i)
      if (c[i].valid) {
        st.mean[i] += c[i].rel;
        st.count[i]++;
      }
  for (std::size_t i = 0; i < nt; ++i)
    if (st.count[i] > 0) st.mean[i] /= st.count[i];
  for (const auto& c : curves)
    for (std::size_t i = 0; i < nt; ++i)
      if (c[i].valid) {
        double dd = c[i].rel - st.mean[i];
        st.stddev[i] += dd * dd;
      }
  for (std::size_t i = 0; i < nt; ++i)
    st.stddev[i] = st.count[i] > 1 ? std::sqrt(st.stddev[i] / (st.count[i] - 1)) : 0.0;
  return st;
}

}  // namespace pf::oracle
