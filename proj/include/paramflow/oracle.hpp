// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference solutions used for evaluation: free-space heat kernel averaging,
// exact eigenmode decay, a spectral (Fourier) solver for periodic heat in low
// dimension, a first-order upwind reference for the 1-d conservation law, the
// log-transform integral formula for the viscous HJB value function, and
// relative-error curves of model trajectories against any of them.

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "paramflow/fit.hpp"
#include "paramflow/ode.hpp"
#include "paramflow/sampler.hpp"

namespace pf::oracle {

using SpaceTimeFn = std::function<double(std::span<const double> x, double t)>;

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// u(x,t) = E_{y ~ N(x, 2t I)} [g(y)]; exact for the free-space heat equation
// and, for 2-periodic g, identical to the periodic solution.
McEstimate heat_exact(const rom::TargetFn& g, std::span<const double> x, double t, int n_mc,
                      Rng& rng);

// amplitude * exp(-pi^2 |k|^2 t) * sin(pi k . x)
double heat_mode_exact(std::span<const int> k, double amplitude, std::span<const double> x,
                       double t);

// Fourier-series heat solver on the 2-periodic cube, d <= 3. Coefficients are
// computed once from g on a tensor grid; evaluation sums the decayed modes.
class HeatSpectral {
 public:
  HeatSpectral(const rom::TargetFn& g, int d, int max_mode = 16, int grid_n = 48);
  double value(std::span<const double> x, double t) const;
  int max_mode() const { return k_; }

 private:
  int d_, k_, nk_;
  std::vector<std::complex<double>> coef_;
};

// First-order upwind grid solution of du/dt = d/dy (speed * tanh(u)) on
// y in [-1, 1) with periodic wrap. Conservative flux differencing; monotone
// under the CFL condition dt * speed <= dy (tanh' <= 1).
class UpwindSolution {
 public:
  double value(double t, double y) const;  // bilinear in (t, y)
  double total_variation(int row) const;
  double integral(int row) const;  // dy * sum u
  int rows() const { return nt_ + 1; }
  double T = 0.0;
  int nt_ = 0, nx_ = 0;
  std::vector<double> u;  // (nt+1) x nx

 private:
  friend UpwindSolution upwind_1d(const std::function<double(double)>&, double, int, int, double);
};

// Throws with the required step count if the CFL condition fails.
UpwindSolution upwind_1d(const std::function<double(double)>& g1, double T, int n_t, int n_x,
                         double speed = 2.0);

// Viscous HJB value via the log-transform integral,
//   u(x,t) = -2 eps ln E_{y ~ N(x, 2 eps (T-t) I)} [ exp(-g(y) / (2 eps)) ],
// evaluated with a shifted log-sum-exp. Returns g(x) at t = T.
double cole_hopf(const rom::TargetFn& g, std::span<const double> x, double t, double T,
                 double eps, int n_mc, Rng& rng);

// ---- error curves ----

struct ErrPoint {
  double t = 0.0;
  double rel = 0.0;   // sqrt( sum w (u - u*)^2 / sum w u*^2 )
  bool valid = true;  // false when the oracle norm is below floor
};

// Relative L2 errors of u_theta(t) against the oracle along a trajectory
// whose state is theta (dim m) or [theta; s] (dim m+1).
std::vector<ErrPoint> relative_error_curve(const rom::ModelSpec& ms, const ode::Trajectory& tr,
                                           const SpaceTimeFn& oracle,
                                           const rom::DomainSampler& dom,
                                           std::span<const double> tgrid, int n_mc, Rng& rng);

struct CurveStats {
  std::vector<double> t, mean, stddev;
  std::vector<int> count;  // valid curves per time point
};

CurveStats aggregate_curves(const std::vector<std::vector<ErrPoint>>& curves);

}  // namespace pf::oracle
