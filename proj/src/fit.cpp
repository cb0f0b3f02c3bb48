// SPDX-License-Identifier: Apache-2.0
#include "paramflow/fit.hpp"

#include <cmath>

namespace pf::rom {

namespace {
constexpr double kDenFloor = 1e-12;

struct Batch {
  std::vector<double> pts, wts, gvals;
};

Batch draw_batch(const ModelSpec& ms, const TargetFn& g, const DomainSampler& dom,
                 std::span<const double> theta, int n, Rng& rng) {
  Batch b;
  b.pts.resize(std::size_t(n) * ms.d);
  b.wts.resize(n);
  sample_domain(dom, ms, theta, n, rng, b.pts, b.wts);
  b.gvals.resize(n);
  for (int k = 0; k < n; ++k) b.gvals[k] = g(std::span<const double>(b.pts).subspan(
      std::size_t(k) * ms.d, ms.d));
  return b;
}

// squared relative misfit and its theta-gradient on a fixed batch
double misfit_and_grad(const ModelSpec& ms, std::span<const double> theta, const Batch& b,
                       std::span<double> grad) {
  const int n = static_cast<int>(b.wts.size());
  const int m = ms.param_count();
  double num = 0.0, den = 0.0;
  std::vector<double> gt(m), coef(n);
  for (int k = 0; k < n; ++k) {
    auto x = std::span<const double>(b.pts).subspan(std::size_t(k) * ms.d, ms.d);
    double u = eval<double, double>(ms, theta, x);
    double diff = u - b.gvals[k];
    num += b.wts[k] * diff * diff;
    den += b.wts[k] * b.gvals[k] * b.gvals[k];
    coef[k] = b.wts[k] * diff;
  }
  den = std::max(den, kDenFloor);
  fill(grad, 0.0);
  for (int k = 0; k < n; ++k) {
    auto x = std::span<const double>(b.pts).subspan(std::size_t(k) * ms.d, ms.d);
    grad_theta<double, double>(ms, theta, x, gt);
    axpy(2.0 * coef[k] / den, gt, grad);
  }
  return num / den;
}

double misfit_only(const ModelSpec& ms, std::span<const double> theta, const Batch& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < b.wts.size(); ++k) {
    auto x = std::span<const double>(b.pts).subspan(k * ms.d, ms.d);
    double u = eval<double, double>(ms, theta, x);
    num += b.wts[k] * (u - b.gvals[k]) * (u - b.gvals[k]);
    den += b.wts[k] * b.gvals[k] * b.gvals[k];
  }
  return std::sqrt(num / std::max(den, kDenFloor));
}

// Levenberg-Marquardt polish on the squared misfit. The Gauss-Newton system
// (J^T W J + lam I) delta = J^T W (u - g) is rank-deficient for these
// overparameterized families, so lam adapts with accept/reject steps.
void lm_polish(const ModelSpec& ms, std::vector<double>& theta, const Batch& b, int budget) {
  const int m = ms.param_count();
  const int n = static_cast<int>(b.wts.size());
  std::vector<double> gt(m), delta(m);
  auto assemble = [&](const std::vector<double>& th, oracle::GramSystem& sys) {
    sys.G.assign(std::size_t(m) * m, 0.0);
    sys.p.assign(m, 0.0);
    for (int k = 0; k < n; ++k) {
      auto x = std::span<const double>(b.pts).subspan(std::size_t(k) * ms.d, ms.d);
      grad_theta<double, double>(ms, th, x, gt);
      double res = eval<double, double>(ms, th, x) - b.gvals[k];
      const double w = b.wts[k] / n;
      for (int i = 0; i < m; ++i) {
        sys.p[i] += w * gt[i] * res;
        double* row = sys.G.data() + std::size_t(i) * m;
        for (int j = i; j < m; ++j) row[j] += w * gt[i] * gt[j];
      }
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < i; ++j) sys.G[std::size_t(i) * m + j] = sys.G[std::size_t(j) * m + i];
  };

  oracle::GramSystem sys;
  assemble(theta, sys);
  double trace = 0.0;
  for (int i = 0; i < m; ++i) trace += sys.G[std::size_t(i) * m + i];
  double lam = 1e-3 * std::max(trace / m, 1e-12);
  double cur = misfit_only(ms, theta, b);

  for (int k = 0; k < budget; ++k) {
    oracle::GramSystem trial_sys = sys;
    trial_sys.lambda = lam;
    oracle::solve_gram(trial_sys, delta);
    std::vector<double> trial = theta;
    for (int i = 0; i < m; ++i) trial[i] -= delta[i];
    double next = misfit_only(ms, trial, b);
    if (std::isfinite(next) && next < cur) {
      theta = std::move(trial);
      cur = next;
      lam = std::max(lam * 0.3, 1e-14 * trace);
      assemble(theta, sys);
    } else {
      lam *= 10.0;
      if (lam > 1e6 * trace) break;  // nothing left to gain
    }
  }
}

}  // namespace

double relative_misfit(const ModelSpec& ms, std::span<const double> theta, const TargetFn& g,
                       const DomainSampler& dom, int points, Rng& rng) {
  return misfit_only(ms, theta, draw_batch(ms, g, dom, theta, points, rng));
}

namespace {

// One optimization attempt: Adam descent with periodic resampling, then an
// LM polish. Returns the best iterate judged on its training batches.
std::pair<std::vector<double>, int> fit_attempt(const ModelSpec& ms, const TargetFn& g,
                                                const DomainSampler& dom, const FitOptions& opt,
                                                std::vector<double> theta, Rng& rng) {
  const int m = ms.param_count();
  Batch batch = draw_batch(ms, g, dom, theta, opt.mc_points, rng);
  std::vector<double> best = theta;
  double best_misfit = misfit_only(ms, theta, batch);
  int it = 0;
  if (best_misfit > 0.5 * opt.tolerance) {
    opt::Adam adam(m, {opt.lr, 0.9, 0.999, 1e-8});
    std::vector<double> grad(m);
    for (it = 1; it <= opt.max_iters; ++it) {
      if (opt.resample_every > 0 && it % opt.resample_every == 0)
        batch = draw_batch(ms, g, dom, theta, opt.mc_points, rng);
      if (opt.lr_decay > 0.0 && opt.lr_decay < 1.0)
        adam.set_lr(opt.lr * std::pow(opt.lr_decay, double(it) / opt.max_iters));
      double j = misfit_and_grad(ms, theta, batch, grad);
      adam.step(theta, grad);
      double rel = std::sqrt(std::max(j, 0.0));
      if (rel < best_misfit) {
        best_misfit = rel;
        best = theta;
      }
      if (rel <= 0.5 * opt.tolerance) break;  // headroom before the fresh-point check
    }
    theta = best;
    // damped least-squares polish; Adam alone stalls near the optimum
    if (opt.gauss_newton_steps > 0) {
      batch = draw_batch(ms, g, dom, theta, opt.mc_points, rng);
      std::vector<double> trial = theta;
      lm_polish(ms, trial, batch, opt.gauss_newton_steps);
      if (misfit_only(ms, trial, batch) < best_misfit) theta = std::move(trial);
    }
  }
  return {std::move(theta), std::min(it, opt.max_iters)};
}

}  // namespace

FitResult fit_initial(const ModelSpec& ms, const TargetFn& g, const DomainSampler& dom,
                      const FitOptions& opt, Rng& rng, const ParamVector* init,
                      const InitSampler* init_sampler) {
  if (opt.max_iters < 0 || opt.mc_points < 1)
    throw std::invalid_argument("fit: bad optimizer budget");

  FitResult res;
  res.theta = ParamVector(ms);
  res.rel_l2 = 1e300;
  const int attempts = std::max(1, opt.restarts);
  for (int a = 0; a < attempts; ++a) {
    ParamVector start(ms);
    if (a == 0 && init) {
      init->check();
      start = *init;
    } else if (init_sampler) {
      start = sample_initial(*init_sampler, ms, rng);
    } else {
      start = sample_initial(GaussianSampler{0.0, 0.25}, ms, rng);
    }
    auto [theta, iters] = fit_attempt(ms, g, dom, opt, start.values, rng);
    Batch fresh = draw_batch(ms, g, dom, theta, opt.eval_points, rng);
    double rel = misfit_only(ms, theta, fresh);
    res.iterations += iters;
    if (rel < res.rel_l2) {
      res.rel_l2 = rel;
      res.theta.values = std::move(theta);
    }
    if (res.rel_l2 <= opt.tolerance) break;
  }
  res.converged = res.rel_l2 <= opt.tolerance;
  return res;
}

}  // namespace pf::rom
