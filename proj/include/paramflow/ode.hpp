// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic ODE integration: fixed-step Euler / classical RK4 and an
// adaptive Dormand-Prince 5(4) with PI step control and 4th-order dense
// output. Fixed-grid trajectories keep the field values at the nodes so a
// cubic Hermite interpolant (and the adjoint pass) can reuse them.

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pf::ode {

enum class Method { Euler, RK4, Dopri5 };

struct SolverSpec {
  Method method = Method::RK4;
  int steps = 20;          // fixed-step methods
  double rtol = 1e-6;      // Dopri5
  double atol = 1e-8;      // Dopri5
  int max_steps = 100000;  // Dopri5

  void validate() const {
    if (steps < 1) throw std::invalid_argument("solver: steps must be >= 1");
    if (!(rtol > 0.0) || !(atol > 0.0))
      throw std::invalid_argument("solver: tolerances must be > 0");
    if (max_steps < 1) throw std::invalid_argument("solver: max_steps must be >= 1");
  }
};

std::string method_name(Method m);
Method method_from_name(const std::string& s);

using Field = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

struct SolveStats {
  long nfev = 0;
  int naccepted = 0;
  int nrejected = 0;
  double max_accepted_err = 0.0;  // embedded estimate, <= 1 on every accepted step
};

struct Trajectory {
  int dim = 0;
  std::vector<double> t;
  std::vector<double> y;      // (#points x dim) row-major
  std::vector<double> f;      // field at stored points (fixed-grid methods)
  std::vector<double> dense;  // Dopri5: 5*dim interpolation coefficients per step
  SolveStats stats;

  std::size_t points() const { return t.size(); }
  std::span<const double> state(std::size_t i) const {
    return {y.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> deriv(std::size_t i) const {
    return {f.data() + i * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> back_state() const { return state(points() - 1); }

  // Interpolated state at time tt (clamped to the stored range). Dopri5 uses
  // its dense coefficients, fixed grids use cubic Hermite on (y, f).
  void state_at(double tt, std::span<double> out) const;
};

Trajectory integrate(const Field& field, std::span<const double> y0, double t0, double t1,
                     const SolverSpec& spec);

// One classical RK4 step; exposed for the trainer's rollout/adjoint passes.
// stage_y (4 x dim) and stage_f (4 x dim) receive the stage points and field
// values so callers can replay a step exactly.
void rk4_step(const Field& field, double t, double h, std::span<const double> y,
              std::span<double> ynext, std::span<double> stage_y, std::span<double> stage_f);

}  // namespace pf::ode
