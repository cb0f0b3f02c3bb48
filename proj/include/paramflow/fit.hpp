// SPDX-License-Identifier: Apache-2.0
#pragma once

// Initial-condition fitting: minimize the empirical relative squared L2
// misfit between u_theta and a target g over Monte-Carlo point sets.

#include <functional>
#include <optional>
#include <span>

#include "paramflow/adam.hpp"
#include "paramflow/galerkin.hpp"
#include "paramflow/model.hpp"
#include "paramflow/sampler.hpp"

namespace pf::rom {

using TargetFn = std::function<double(std::span<const double> x)>;

struct FitOptions {
  double tolerance = 1e-3;  // relative L2 target
  int max_iters = 2000;
  double lr = 1e-2;
  int mc_points = 4096;
  int resample_every = 100;  // fresh MC batch cadence
  int eval_points = 4096;    // fresh points for the reported misfit
  double lr_decay = 1.0;     // optional geometric lr shrink to lr * lr_decay
  int gauss_newton_steps = 25;  // damped least-squares polish budget after Adam
  int restarts = 3;             // fresh random starts until the tolerance is met
};

struct FitResult {
  ParamVector theta;
  double rel_l2 = 0.0;  // measured on fresh points
  int iterations = 0;
  bool converged = false;
};

// Starts from `init` when given, otherwise from a sampler draw. Reports the
// misfit on a fresh point set; converged == (rel_l2 <= tolerance). On budget
// exhaustion the best iterate seen is returned with converged = false.
FitResult fit_initial(const ModelSpec& ms, const TargetFn& g, const DomainSampler& dom,
                      const FitOptions& opt, Rng& rng, const ParamVector* init = nullptr,
                      const InitSampler* init_sampler = nullptr);

// Relative L2 misfit of u_theta against g on one sampled batch.
double relative_misfit(const ModelSpec& ms, std::span<const double> theta, const TargetFn& g,
                       const DomainSampler& dom, int points, Rng& rng);

}  // namespace pf::rom
