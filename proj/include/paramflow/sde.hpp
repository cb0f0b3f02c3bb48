// SPDX-License-Identifier: Apache-2.0
#pragma once

// Euler-Maruyama simulation of dX = drift(X,t) dt + sigma dW with constant
// scalar diffusion (sigma = sqrt(2*eps) for the controlled problems here).

#include <functional>
#include <span>
#include <vector>

#include "paramflow/util.hpp"

namespace pf::sde {

using Drift = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

struct PathEnsemble {
  int dim = 0;
  int n_paths = 0;
  std::vector<double> times;
  std::vector<double> states;  // n_paths x times x dim

  std::span<const double> state(int path, std::size_t ti) const {
    return {states.data() + (std::size_t(path) * times.size() + ti) * dim,
            static_cast<std::size_t>(dim)};
  }
};

// X_{k+1} = X_k + drift(X_k, t_k) dt + sigma sqrt(dt) Z_k. The final step is
// shortened when dt does not divide T. store_every thins the stored states
// (first and last points are always kept).
PathEnsemble euler_maruyama(const Drift& drift, double sigma, std::span<const double> x0,
                            double dt, double T, Rng& rng, int n_paths, int store_every = 1);

}  // namespace pf::sde
