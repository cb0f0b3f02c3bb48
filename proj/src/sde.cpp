// SPDX-License-Identifier: Apache-2.0
#include "paramflow/sde.hpp"

#include <cmath>
#include <stdexcept>

namespace pf::sde {

PathEnsemble euler_maruyama(const Drift& drift, double sigma, std::span<const double> x0,
                            double dt, double T, Rng& rng, int n_paths, int store_every) {
  if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("sde: need dt > 0 and T > 0");
  if (n_paths < 1 || store_every < 1)
    throw std::invalid_argument("sde: n_paths and store_every must be >= 1");
  const int d = static_cast<int>(x0.size());
  const int n_steps = static_cast<int>(std::ceil(T / dt - 1e-12));

  PathEnsemble ens;
  ens.dim = d;
  ens.n_paths = n_paths;
  for (int k = 0; k <= n_steps; ++k)
    if (k == 0 || k == n_steps || k % store_every == 0) ens.times.push_back(std::min(k * dt, T));
  ens.states.resize(std::size_t(n_paths) * ens.times.size() * d);

  std::vector<double> x(d), dx(d);
  for (int p = 0; p < n_paths; ++p) {
    copy_to(x0, x);
    std::size_t si = 0;
    auto store = [&](int k) {
      if (k == 0 || k == n_steps || k % store_every == 0) {
        copy_to(x, {ens.states.data() + (std::size_t(p) * ens.times.size() + si) * d,
                    std::size_t(d)});
        ++si;
      }
    };
    store(0);
    for (int k = 0; k < n_steps; ++k) {
      double t = k * dt;
      double h = std::min(dt, T - t);
      drift(t, x, dx);
      if (!all_finite(dx)) throw std::runtime_error("sde: non-finite drift");
      double sq = sigma * std::sqrt(h);
      for (int i = 0; i < d; ++i) x[i] += dx[i] * h + sq * normal(rng);
      store(k + 1);
    }
  }
  return ens;
}

}  // namespace pf::sde
