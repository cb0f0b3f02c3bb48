// SPDX-License-Identifier: Apache-2.0
#include "paramflow/ode.hpp"

#include <algorithm>
#include <cmath>

#include "paramflow/util.hpp"

namespace pf::ode {

std::string method_name(Method m) {
  switch (m) {
    case Method::Euler: return "euler";
    case Method::RK4: return "rk4";
    case Method::Dopri5: return "dopri5";
  }
  return "?";
}

Method method_from_name(const std::string& s) {
  if (s == "euler") return Method::Euler;
  if (s == "rk4") return Method::RK4;
  if (s == "dopri5") return Method::Dopri5;
  throw std::invalid_argument("unknown solver '" + s + "'");
}

namespace {

void check_state(std::span<const double> y, double t) {
  if (!all_finite(y))
    throw std::runtime_error("ode: non-finite state at t=" + std::to_string(t) +
                             " (trajectory escape)");
}

}  // namespace

void rk4_step(const Field& field, double t, double h, std::span<const double> y,
              std::span<double> ynext, std::span<double> stage_y, std::span<double> stage_f) {
  const std::size_t n = y.size();
  auto sy = [&](int s) { return stage_y.subspan(s * n, n); };
  auto sf = [&](int s) { return stage_f.subspan(s * n, n); };

  copy_to(y, sy(0));
  field(t, sy(0), sf(0));
  for (std::size_t i = 0; i < n; ++i) sy(1)[i] = y[i] + 0.5 * h * sf(0)[i];
  field(t + 0.5 * h, sy(1), sf(1));
  for (std::size_t i = 0; i < n; ++i) sy(2)[i] = y[i] + 0.5 * h * sf(1)[i];
  field(t + 0.5 * h, sy(2), sf(2));
  for (std::size_t i = 0; i < n; ++i) sy(3)[i] = y[i] + h * sf(2)[i];
  field(t + h, sy(3), sf(3));
  for (std::size_t i = 0; i < n; ++i)
    ynext[i] = y[i] + h / 6.0 * (sf(0)[i] + 2.0 * sf(1)[i] + 2.0 * sf(2)[i] + sf(3)[i]);
}

namespace {

Trajectory integrate_fixed(const Field& field, std::span<const double> y0, double t0, double t1,
                           const SolverSpec& spec) {
  const int n = static_cast<int>(y0.size());
  const int steps = spec.steps;
  const double h = (t1 - t0) / steps;
  Trajectory tr;
  tr.dim = n;
  tr.t.resize(steps + 1);
  tr.y.resize(std::size_t(steps + 1) * n);
  tr.f.resize(std::size_t(steps + 1) * n);
  copy_to(y0, {tr.y.data(), std::size_t(n)});
  tr.t[0] = t0;

  std::vector<double> stage_y(4 * std::size_t(n)), stage_f(4 * std::size_t(n));
  for (int k = 0; k < steps; ++k) {
    double t = t0 + k * h;
    std::span<const double> yk{tr.y.data() + std::size_t(k) * n, std::size_t(n)};
    std::span<double> ynext{tr.y.data() + std::size_t(k + 1) * n, std::size_t(n)};
    if (spec.method == Method::Euler) {
      std::span<double> fk{tr.f.data() + std::size_t(k) * n, std::size_t(n)};
      field(t, yk, fk);
      tr.stats.nfev++;
      for (int i = 0; i < n; ++i) ynext[i] = yk[i] + h * fk[i];
    } else {
      rk4_step(field, t, h, yk, ynext, stage_y, stage_f);
      tr.stats.nfev += 4;
      copy_to({stage_f.data(), std::size_t(n)}, {tr.f.data() + std::size_t(k) * n, std::size_t(n)});
    }
    tr.t[k + 1] = t0 + (k + 1) * h;
    check_state(ynext, tr.t[k + 1]);
    tr.stats.naccepted++;
  }
  // field value at the final node completes the Hermite data
  std::span<const double> yT{tr.y.data() + std::size_t(steps) * n, std::size_t(n)};
  field(t1, yT, {tr.f.data() + std::size_t(steps) * n, std::size_t(n)});
  tr.stats.nfev++;
  return tr;
}

// Dormand-Prince 5(4) tableau
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784,
                 A76 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;
constexpr double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0,
                 D4 = -10690763975.0 / 1880347072.0, D5 = 701980252875.0 / 199316789632.0,
                 D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0;

Trajectory integrate_dopri5(const Field& field, std::span<const double> y0, double t0, double t1,
                            const SolverSpec& spec) {
  const std::size_t n = y0.size();
  const double span = t1 - t0;
  Trajectory tr;
  tr.dim = static_cast<int>(n);

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);

  auto push_point = [&](double t, std::span<const double> yy) {
    tr.t.push_back(t);
    tr.y.insert(tr.y.end(), yy.begin(), yy.end());
  };

  double t = t0;
  field(t, y, k1);
  tr.stats.nfev++;
  push_point(t, y);

  // classical initial-step heuristic from the k1 and a trial Euler step
  double h;
  {
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = spec.atol + spec.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::abs(span));
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h0 * k1[i];
    field(t + h0, ytmp, k2);
    tr.stats.nfev++;
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = spec.atol + spec.rtol * std::abs(y[i]);
      d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / n) / h0;
    double h1 = (std::max(d1, d2) <= 1e-15)
                    ? std::max(1e-6, h0 * 1e-3)
                    : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min({100 * h0, h1, std::abs(span)});
  }

  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  constexpr double facc1 = 5.0, facc2 = 0.1;  // 1/fac_min, 1/fac_max
  double facold = 1e-4;
  bool last_rejected = false;
  int nstep = 0;

  while (t < t1 - 1e-14 * std::max(1.0, std::abs(t1))) {
    if (++nstep > spec.max_steps)
      throw std::runtime_error("ode: dopri5 exceeded max_steps=" + std::to_string(spec.max_steps));
    h = std::min(h, t1 - t);

    auto stage = [&](std::span<double> k, double c, auto&&... aks) {
      const double as[] = {aks.first...};
      const std::span<const double> ks[] = {aks.second...};
      for (std::size_t i = 0; i < n; ++i) {
        double acc = y[i];
        for (std::size_t j = 0; j < sizeof...(aks); ++j) acc += h * as[j] * ks[j][i];
        ytmp[i] = acc;
      }
      field(t + c * h, ytmp, k);
      tr.stats.nfev++;
    };
    using P = std::pair<double, std::span<const double>>;
    stage(k2, 1.0 / 5, P{A21, k1});
    stage(k3, 3.0 / 10, P{A31, k1}, P{A32, k2});
    stage(k4, 4.0 / 5, P{A41, k1}, P{A42, k2}, P{A43, k3});
    stage(k5, 8.0 / 9, P{A51, k1}, P{A52, k2}, P{A53, k3}, P{A54, k4});
    stage(k6, 1.0, P{A61, k1}, P{A62, k2}, P{A63, k3}, P{A64, k4}, P{A65, k5});
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    field(t + h, ynew, k7);
    tr.stats.nfev++;

    double errnorm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
      double sc = spec.atol + spec.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      errnorm += (err[i] / sc) * (err[i] / sc);
    }
    errnorm = std::sqrt(errnorm / n);

    const double fac11 = std::pow(errnorm, expo1);
    if (errnorm <= 1.0) {
      check_state(ynew, t + h);
      // dense coefficients for u(t + theta h)
      for (std::size_t i = 0; i < n; ++i) {
        double dy = ynew[i] - y[i];
        double bspl = h * k1[i] - dy;
        tr.dense.push_back(y[i]);
        tr.dense.push_back(dy);
        tr.dense.push_back(bspl);
        tr.dense.push_back(dy - h * k7[i] - bspl);
        tr.dense.push_back(h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] +
                                D7 * k7[i]));
      }
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      push_point(t, y);
      tr.stats.naccepted++;
      tr.stats.max_accepted_err = std::max(tr.stats.max_accepted_err, errnorm);
      facold = std::max(errnorm, 1e-4);
      double fac = fac11 / std::pow(facold, beta);
      fac = std::max(facc2, std::min(facc1, fac / safe));
      double hnew = h / fac;
      if (last_rejected) hnew = std::min(hnew, h);
      last_rejected = false;
      h = hnew;
    } else {
      h = h / std::min(facc1, fac11 / safe);
      last_rejected = true;
      tr.stats.nrejected++;
    }
  }
  return tr;
}

}  // namespace

void Trajectory::state_at(double tt, std::span<double> out) const {
  const std::size_t np = points();
  if (np == 0) throw std::logic_error("trajectory: empty");
  if (tt <= t.front()) {
    copy_to(state(0), out);
    return;
  }
  if (tt >= t.back()) {
    copy_to(back_state(), out);
    return;
  }
  std::size_t hi = std::upper_bound(t.begin(), t.end(), tt) - t.begin();
  std::size_t k = hi - 1;
  double h = t[k + 1] - t[k];
  double th = (tt - t[k]) / h;

  if (!dense.empty()) {
    const double* rc = dense.data() + k * 5 * dim;
    double s1 = 1.0 - th;
    for (int i = 0; i < dim; ++i) {
      const double* c = rc + std::size_t(i) * 5;
      out[i] = c[0] + th * (c[1] + s1 * (c[2] + th * (c[3] + s1 * c[4])));
    }
    return;
  }
  if (!f.empty()) {
    // cubic Hermite with stored endpoint derivatives
    double h00 = (1 + 2 * th) * (1 - th) * (1 - th);
    double h10 = th * (1 - th) * (1 - th);
    double h01 = th * th * (3 - 2 * th);
    double h11 = th * th * (th - 1);
    auto y0 = state(k), y1 = state(k + 1), f0 = deriv(k), f1 = deriv(k + 1);
    for (int i = 0; i < dim; ++i)
      out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    return;
  }
  auto y0 = state(k), y1 = state(k + 1);
  for (int i = 0; i < dim; ++i) out[i] = (1 - th) * y0[i] + th * y1[i];
}

Trajectory integrate(const Field& field, std::span<const double> y0, double t0, double t1,
                     const SolverSpec& spec) {
  spec.validate();
  if (!(t1 > t0)) throw std::invalid_argument("ode: need t1 > t0");
  if (!all_finite(y0)) throw std::invalid_argument("ode: non-finite initial state");
  if (spec.method == Method::Dopri5) return integrate_dopri5(field, y0, t0, t1, spec);
  return integrate_fixed(field, y0, t0, t1, spec);
}

}  // namespace pf::ode
