// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sequential least-squares parameter evolution ("time marching"): at each
// step solve the normal equations G(theta) delta = p(theta) with
//   G = (1/N) sum w grad_theta u grad_theta u^T,
//   p = (1/N) sum w grad_theta u F[u],
// then advance theta <- theta + dt * delta. Used to generate the anchor
// pairs that augment trajectory training, and as a slow reference evolution.

#include <vector>

#include "paramflow/operators.hpp"
#include "paramflow/sampler.hpp"
#include "paramflow/trainer.hpp"

namespace pf::oracle {

struct GramSystem {
  std::vector<double> G;  // m x m row-major, symmetric PSD
  std::vector<double> p;  // m
  double lambda = 1e-8;   // ridge
};

// Assembles G and p from one MC batch (same batch for both, so the pair stays
// consistent).
GramSystem assemble_gram(const rom::ModelSpec& ms, const pde::OperatorSpec& op,
                         std::span<const double> theta, std::span<const double> pts,
                         std::span<const double> wts, double lambda);

// Solves (G + lambda I) delta = p; returns the relative residual
// ||G delta - p|| / max(||p||, tiny). Throws only if the factorization fails
// at every escalated lambda.
double solve_gram(GramSystem& sys, std::span<double> delta, int* escalations = nullptr);

struct MarchOptions {
  double dt = 1e-3;
  int steps = 100;
  double lambda = 1e-8;
  int mc_points = 256;
};

struct MarchResult {
  train::TargetSet targets;
  std::vector<double> max_rel_residual;  // per start, worst step residual
  int lambda_escalations = 0;
};

MarchResult time_march_targets(const rom::ModelSpec& ms, const pde::OperatorSpec& op,
                               const std::vector<rom::ParamVector>& starts,
                               const rom::DomainSampler& dom, const MarchOptions& opt, Rng& rng);

}  // namespace pf::oracle
