// SPDX-License-Identifier: Apache-2.0
#pragma once

// Trajectory training of the control field: forward rollouts of the
// augmented state gamma = [theta; s], continuous adjoint pullbacks for
// grad_xi of the terminal loss, the least-squares baseline trained on static
// parameter samples, and a discretize-then-optimize gradient used as an
// independent cross-check.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paramflow/adam.hpp"
#include "paramflow/field_tape.hpp"
#include "paramflow/ode.hpp"
#include "paramflow/sampler.hpp"

namespace pf::train {

// time-marched anchor pairs (theta_i(0), theta_bar_i(T))
struct TargetSet {
  std::vector<rom::ParamVector> start;
  std::vector<rom::ParamVector> end;
  std::size_t size() const { return start.size(); }
};

struct StopRule {
  int window = 20;      // moving-average width for the percent-decrease rule
  double pct = 0.001;   // stop when avg per-step decrease < 0.1%
  int max_iters = 10000;
  int min_iters = 0;
  double loss_floor = 0.0;  // optional early stop on the loss itself; 0 = off
};

struct TrainConfig {
  int batch = 100;         // trajectories per step (K)
  int pool = 1000;         // pool of initials (M)
  int mc_points = 64;      // residual batch (N)
  double horizon = 0.1;    // T
  int rollout_steps = 20;  // fixed RK4 grid
  opt::AdamParams adam{5e-4, 0.9, 0.999, 1e-8};
  StopRule stop;
  double aug_weight = 1.0;
  int aug_batch = 0;       // 0 => min(batch, |targets|)
  int terminal_mc = 512;   // points for the terminal misfit estimate
  bool h1_mode = false;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct LossRow {
  int iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wall = 0.0;
};

struct TrainResult {
  ctrl::ControlParams params;
  std::vector<LossRow> history;
  std::string stop_reason;
  int iterations = 0;
  // fingerprints of every pool initial, for held-out disjointness assertions
  std::vector<std::uint64_t> pool_ids;
};

// ---- building blocks ----

// Forward rollout of gamma = [theta; s] from theta0 with s(0) = 0.
ode::Trajectory rollout(FieldEval& ev, std::span<const double> theta0, double T, int steps);

// Continuous adjoint over a stored fixed-grid rollout. terminal_cot is the
// extra d(loss)/d(theta(T)) term (empty => plain accumulated-cost loss);
// grad_xi accumulates scale * d(loss)/d(xi).
void adjoint_gradient(FieldEval& ev, const ode::Trajectory& tr,
                      std::span<const double> terminal_cot, std::span<double> grad_xi,
                      double scale);

// Discrete gradient: reverse pass through the unrolled RK4 update. Same
// contract as adjoint_gradient; used by tests and the acceptance suite.
void unrolled_gradient(FieldEval& ev, const ode::Trajectory& tr,
                       std::span<const double> terminal_cot, std::span<double> grad_xi,
                       double scale);

// Relative squared misfit ||u_a - u_b||^2 / max(||u_b||^2, floor) on one MC
// batch, with optional gradient w.r.t. a.
double terminal_misfit(const rom::ModelSpec& ms, std::span<const double> theta_a,
                       std::span<const double> theta_b, std::span<const double> pts,
                       std::span<const double> wts, std::span<double> grad_a);

using ProgressFn = std::function<void(const LossRow&)>;

TrainResult train(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                  const ctrl::ControlNetSpec& control, const rom::InitSampler& pool_sampler,
                  const rom::DomainSampler& dom, const TrainConfig& cfg,
                  const TargetSet* targets = nullptr, const ProgressFn& progress = nullptr);

// Least-squares baseline: minimizes the mean running cost over a fixed set
// of parameter samples, no trajectories.
struct NlsConfig {
  int batch_theta = 128;
  int mc_points = 64;
  opt::AdamParams adam{5e-4, 0.9, 0.999, 1e-8};
  StopRule stop;
  int threads = 1;
  std::uint64_t seed = 0;
};

TrainResult nls_train(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                      const ctrl::ControlNetSpec& control,
                      const std::vector<rom::ParamVector>& theta_samples,
                      const rom::DomainSampler& dom, const NlsConfig& cfg,
                      const ProgressFn& progress = nullptr);

}  // namespace pf::train
