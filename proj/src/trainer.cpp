// SPDX-License-Identifier: Apache-2.0
#include "paramflow/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace pf::train {

ode::Trajectory rollout(FieldEval& ev, std::span<const double> theta0, double T, int steps) {
  const int m = ev.program().m();
  std::vector<double> gamma0(m + 1, 0.0);
  copy_to(theta0, {gamma0.data(), std::size_t(m)});
  ode::Field f = [&](double, std::span<const double> y, std::span<double> dy) {
    ev.eval(y.first(m), dy.first(m), dy[m]);
  };
  ode::SolverSpec spec;
  spec.method = ode::Method::RK4;
  spec.steps = steps;
  return ode::integrate(f, gamma0, 0.0, T, spec);
}

void adjoint_gradient(FieldEval& ev, const ode::Trajectory& tr,
                      std::span<const double> terminal_cot, std::span<double> grad_xi,
                      double scale) {
  const int m = ev.program().m();
  const std::size_t np = tr.points();
  if (np < 2) return;  // zero-length horizon: gradient contribution is zero

  // a(T) = -d loss / d gamma(T); the s component stays -1 because f does not
  // depend on s, so only the theta block evolves.
  std::vector<double> a(m, 0.0);
  if (!terminal_cot.empty())
    for (int j = 0; j < m; ++j) a[j] = -terminal_cot[j];
  const double a_s = -1.0;

  std::vector<double> th_mid(m), dtheta(m);
  std::vector<double> k1(m), k2(m), k3(m), k4(m), atmp(m);

  for (std::size_t seg = np - 1; seg-- > 0;) {
    const double h = tr.t[seg + 1] - tr.t[seg];
    auto y0 = tr.state(seg);       // gamma at t_k
    auto y1 = tr.state(seg + 1);   // gamma at t_{k+1}
    auto f0 = tr.deriv(seg);
    auto f1 = tr.deriv(seg + 1);
    // cubic Hermite midpoint of the theta block
    for (int j = 0; j < m; ++j)
      th_mid[j] = 0.5 * (y0[j] + y1[j]) + 0.125 * h * (f0[j] - f1[j]);

    // backward RK4 step of da/dt = -(df/dtheta)^T a (paper-sign adjoint),
    // while grad_xi accumulates -scale * int a^T df/dxi dt with the same
    // quadrature weights.
    const double hb = -h;
    auto stage = [&](std::span<const double> th, std::span<const double> a_in,
                     std::span<double> k_out, double w, bool reuse) {
      ev.vjp(th, a_in, a_s, dtheta, grad_xi, -scale * w * h / 6.0, reuse);
      for (int j = 0; j < m; ++j) k_out[j] = -dtheta[j];
    };
    stage(y1.first(m), a, k1, 1.0, false);
    for (int j = 0; j < m; ++j) atmp[j] = a[j] + 0.5 * hb * k1[j];
    stage(th_mid, atmp, k2, 2.0, false);
    for (int j = 0; j < m; ++j) atmp[j] = a[j] + 0.5 * hb * k2[j];
    stage(th_mid, atmp, k3, 2.0, true);  // same theta as the previous stage
    for (int j = 0; j < m; ++j) atmp[j] = a[j] + hb * k3[j];
    stage(y0.first(m), atmp, k4, 1.0, false);
    for (int j = 0; j < m; ++j)
      a[j] += hb / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (!all_finite(a))
      throw std::runtime_error("adjoint: non-finite state in backward pass near t=" +
                               std::to_string(tr.t[seg]));
  }
}

void unrolled_gradient(FieldEval& ev, const ode::Trajectory& tr,
                       std::span<const double> terminal_cot, std::span<double> grad_xi,
                       double scale) {
  const int m = ev.program().m();
  const int n = m + 1;
  const std::size_t np = tr.points();
  if (np < 2) return;

  // ybar = +d loss / d gamma
  std::vector<double> ybar(n, 0.0);
  ybar[m] = 1.0;
  if (!terminal_cot.empty())
    for (int j = 0; j < m; ++j) ybar[j] = terminal_cot[j];

  ode::Field f = [&](double, std::span<const double> y, std::span<double> dy) {
    ev.eval(y.first(m), dy.first(m), dy[m]);
  };
  std::vector<double> stage_y(4 * std::size_t(n)), stage_f(4 * std::size_t(n)), ynext(n);
  std::vector<double> kb4(n), kb3(n), kb2(n), kb1(n), d4(m), d3(m), d2(m), d1(m);

  for (std::size_t seg = np - 1; seg-- > 0;) {
    const double h = tr.t[seg + 1] - tr.t[seg];
    // replay the forward stages from the stored left endpoint
    ode::rk4_step(f, tr.t[seg], h, tr.state(seg), ynext, stage_y, stage_f);
    auto sy = [&](int s) {
      return std::span<const double>(stage_y.data() + std::size_t(s) * n, n);
    };

    // reverse through y+ = y + h/6 (k1 + 2k2 + 2k3 + k4); each stage pullback
    // goes through f at the stage point (f never reads s, so only the theta
    // block of ybar picks up contributions)
    for (int j = 0; j < n; ++j) kb4[j] = h / 6.0 * ybar[j];
    ev.vjp(sy(3).first(m), kb4, kb4[m], d4, grad_xi, scale, false);
    for (int j = 0; j < n; ++j) kb3[j] = 2.0 * h / 6.0 * ybar[j] + (j < m ? h * d4[j] : 0.0);
    ev.vjp(sy(2).first(m), kb3, kb3[m], d3, grad_xi, scale, false);
    for (int j = 0; j < n; ++j)
      kb2[j] = 2.0 * h / 6.0 * ybar[j] + (j < m ? 0.5 * h * d3[j] : 0.0);
    ev.vjp(sy(1).first(m), kb2, kb2[m], d2, grad_xi, scale, false);
    for (int j = 0; j < n; ++j)
      kb1[j] = h / 6.0 * ybar[j] + (j < m ? 0.5 * h * d2[j] : 0.0);
    ev.vjp(sy(0).first(m), kb1, kb1[m], d1, grad_xi, scale, false);

    for (int j = 0; j < m; ++j) ybar[j] += d4[j] + d3[j] + d2[j] + d1[j];
  }
}

double terminal_misfit(const rom::ModelSpec& ms, std::span<const double> theta_a,
                       std::span<const double> theta_b, std::span<const double> pts,
                       std::span<const double> wts, std::span<double> grad_a) {
  constexpr double kFloor = 1e-8;  // guards a vanishing target norm
  const int d = ms.d;
  const int n = static_cast<int>(wts.size());
  double num = 0.0, den = 0.0;
  std::vector<double> diffs(n);
  for (int k = 0; k < n; ++k) {
    auto x = pts.subspan(std::size_t(k) * d, d);
    double ua = rom::eval<double, double>(ms, theta_a, x);
    double ub = rom::eval<double, double>(ms, theta_b, x);
    diffs[k] = ua - ub;
    num += wts[k] * diffs[k] * diffs[k];
    den += wts[k] * ub * ub;
  }
  den = std::max(den / n, kFloor) * n;
  if (!grad_a.empty()) {
    fill(grad_a, 0.0);
    std::vector<double> gt(ms.param_count());
    for (int k = 0; k < n; ++k) {
      auto x = pts.subspan(std::size_t(k) * d, d);
      rom::grad_theta<double, double>(ms, theta_a, x, gt);
      axpy(2.0 * wts[k] * diffs[k] / den, gt, grad_a);
    }
  }
  return num / den;
}

namespace {

struct StopTracker {
  std::vector<double> losses;

  // averaged per-step percent decrease over the trailing window
  bool pct_rule_met(const StopRule& r) const {
    if (static_cast<int>(losses.size()) < r.window + 1) return false;
    double acc = 0.0;
    for (int k = 0; k < r.window; ++k) {
      std::size_t i = losses.size() - r.window + k;
      double prev = losses[i - 1];
      acc += (prev - losses[i]) / std::max(std::abs(prev), 1e-300);
    }
    return acc / r.window < r.pct;
  }
};

std::vector<int> draw_batch_indices(int pool, int k, Rng& rng) {
  std::vector<int> idx(pool);
  for (int i = 0; i < pool; ++i) idx[i] = i;
  // partial Fisher-Yates; k <= pool enforced by the caller
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(uniform(rng, 0.0, 1.0) * (pool - i));
    if (j >= pool) j = pool - 1;
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

TrainResult train(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                  const ctrl::ControlNetSpec& control, const rom::InitSampler& pool_sampler,
                  const rom::DomainSampler& dom, const TrainConfig& cfg,
                  const TargetSet* targets, const ProgressFn& progress) {
  if (cfg.batch < 1 || cfg.pool < 1 || cfg.mc_points < 1 || !(cfg.horizon > 0.0))
    throw std::invalid_argument("train: batch, pool, mc_points must be >= 1 and horizon > 0");
  if (cfg.batch > cfg.pool) throw std::invalid_argument("train: batch K must be <= pool M");
  const int m = model.param_count();
  const int d = model.d;

  FieldProgram prog = build_field_program(model, op, control, cfg.mc_points, cfg.h1_mode);
  const int P = prog.n_params();

  Rng rng_pool = make_rng(cfg.seed, 1);
  Rng rng_init = make_rng(cfg.seed, 2);
  Rng rng_iter = make_rng(cfg.seed, 3);

  std::vector<rom::ParamVector> pool = rom::sample_initials(pool_sampler, model, cfg.pool, rng_pool);
  std::vector<std::uint64_t> pool_ids;
  pool_ids.reserve(pool.size());
  for (const auto& th : pool)
    pool_ids.push_back(fnv1a64_bytes(th.values.data(), th.values.size() * sizeof(double)));

  ctrl::ControlParams xi = ctrl::init_params(control, rng_init);
  opt::Adam adam(P, cfg.adam);

  const int threads = std::max(1, cfg.threads);
  std::vector<FieldEval> evals;
  evals.reserve(threads);
  for (int w = 0; w < threads; ++w) evals.emplace_back(prog);

  const bool use_rho = std::holds_alternative<rom::RhoDomain>(dom);
  const int k_aug =
      (targets && targets->size() > 0 && cfg.aug_weight != 0.0)
          ? std::min<int>(cfg.aug_batch > 0 ? cfg.aug_batch : cfg.batch, targets->size())
          : 0;

  TrainResult out;
  out.params = xi;
  out.pool_ids = std::move(pool_ids);
  StopTracker tracker;
  Timer timer;
  std::string stop_reason = "max_iters";
  ctrl::ControlParams last_good = xi;

  struct Job {
    const double* theta0;
    const rom::ParamVector* target_end = nullptr;  // augmentation pair
  };

  std::vector<double> shared_pts(std::size_t(cfg.mc_points) * d), shared_wts(cfg.mc_points);
  std::vector<double> grads;   // one per-trajectory gradient buffer, reduced in order
  std::vector<double> losses;  // per-trajectory losses
  std::vector<double> grad(P);

  int iter = 0;
  for (iter = 1; iter <= cfg.stop.max_iters; ++iter) {
    // all randomness is drawn up front on this thread, so thread count never
    // changes the result
    std::vector<int> bidx = draw_batch_indices(cfg.pool, cfg.batch, rng_iter);
    std::vector<int> aidx =
        k_aug > 0 ? draw_batch_indices(static_cast<int>(targets->size()), k_aug, rng_iter)
                  : std::vector<int>{};
    const int jobs_n = cfg.batch + k_aug;

    std::vector<Job> jobs(jobs_n);
    for (int i = 0; i < cfg.batch; ++i) jobs[i] = {pool[bidx[i]].values.data(), nullptr};
    for (int i = 0; i < k_aug; ++i)
      jobs[cfg.batch + i] = {targets->start[aidx[i]].values.data(), &targets->end[aidx[i]]};

    // per-trajectory residual batches: shared across the step for box
    // domains, drawn per initial from rho(.; theta(0)) otherwise
    std::vector<double> job_pts, job_wts;
    if (use_rho) {
      job_pts.resize(std::size_t(jobs_n) * cfg.mc_points * d);
      job_wts.resize(std::size_t(jobs_n) * cfg.mc_points);
      for (int i = 0; i < jobs_n; ++i)
        rom::sample_domain(dom, model, {jobs[i].theta0, std::size_t(m)}, cfg.mc_points, rng_iter,
                           std::span<double>(job_pts).subspan(std::size_t(i) * cfg.mc_points * d,
                                                              std::size_t(cfg.mc_points) * d),
                           std::span<double>(job_wts).subspan(std::size_t(i) * cfg.mc_points,
                                                              cfg.mc_points));
    } else {
      rom::sample_domain(dom, model, {}, cfg.mc_points, rng_iter, shared_pts, shared_wts);
    }
    // terminal-misfit batches for augmentation pairs (drawn around the target)
    std::vector<double> term_pts, term_wts;
    if (k_aug > 0) {
      term_pts.resize(std::size_t(k_aug) * cfg.terminal_mc * d);
      term_wts.resize(std::size_t(k_aug) * cfg.terminal_mc);
      for (int i = 0; i < k_aug; ++i)
        rom::sample_domain(dom, model, targets->end[aidx[i]].values, cfg.terminal_mc, rng_iter,
                           std::span<double>(term_pts).subspan(
                               std::size_t(i) * cfg.terminal_mc * d,
                               std::size_t(cfg.terminal_mc) * d),
                           std::span<double>(term_wts).subspan(std::size_t(i) * cfg.terminal_mc,
                                                               cfg.terminal_mc));
    }

    grads.assign(std::size_t(jobs_n) * P, 0.0);
    losses.assign(jobs_n, 0.0);
    std::vector<std::string> errors(threads);

    parallel_for(jobs_n, threads, [&](int i, int w) {
      try {
        FieldEval& ev = evals[w];
        ev.set_xi(xi.values);
        if (use_rho)
          ev.set_points(std::span<const double>(job_pts).subspan(
                            std::size_t(i) * cfg.mc_points * d, std::size_t(cfg.mc_points) * d),
                        std::span<const double>(job_wts).subspan(std::size_t(i) * cfg.mc_points,
                                                                 cfg.mc_points));
        else
          ev.set_points(shared_pts, shared_wts);

        ode::Trajectory tr =
            rollout(ev, {jobs[i].theta0, std::size_t(m)}, cfg.horizon, cfg.rollout_steps);
        double loss_i = tr.back_state()[m];
        std::span<double> gi(grads.data() + std::size_t(i) * P, P);
        std::vector<double> term_cot;
        if (jobs[i].target_end) {
          int ai = i - cfg.batch;
          term_cot.resize(m);
          double mis = terminal_misfit(
              model, tr.back_state().first(m), jobs[i].target_end->values,
              std::span<const double>(term_pts).subspan(std::size_t(ai) * cfg.terminal_mc * d,
                                                        std::size_t(cfg.terminal_mc) * d),
              std::span<const double>(term_wts).subspan(std::size_t(ai) * cfg.terminal_mc,
                                                        cfg.terminal_mc),
              term_cot);
          loss_i += mis;
        }
        losses[i] = loss_i;
        adjoint_gradient(ev, tr, term_cot, gi, 1.0);
      } catch (const std::exception& e) {
        errors[w] = e.what();
      }
    });
    for (const auto& e : errors)
      if (!e.empty()) throw std::runtime_error("train: trajectory failure: " + e);

    // fixed-order reduction
    double loss = 0.0;
    fill(grad, 0.0);
    for (int i = 0; i < cfg.batch; ++i) {
      loss += losses[i] / cfg.batch;
      axpy(1.0 / cfg.batch, {grads.data() + std::size_t(i) * P, std::size_t(P)}, grad);
    }
    for (int i = cfg.batch; i < jobs_n; ++i) {
      loss += cfg.aug_weight * losses[i] / k_aug;
      axpy(cfg.aug_weight / k_aug, {grads.data() + std::size_t(i) * P, std::size_t(P)}, grad);
    }

    if (!std::isfinite(loss) || !all_finite(grad)) {
      out.params = last_good;
      stop_reason = "diverged";
      --iter;
      break;
    }
    last_good = xi;
    adam.step(xi.values, grad);

    LossRow row{iter, loss, norm2(grad), timer.seconds()};
    tracker.losses.push_back(loss);
    out.history.push_back(row);
    if (progress) progress(row);

    if (cfg.stop.loss_floor > 0.0 && loss < cfg.stop.loss_floor) {
      stop_reason = "loss_floor";
      break;
    }
    if (iter >= cfg.stop.min_iters && tracker.pct_rule_met(cfg.stop)) {
      stop_reason = "converged";
      break;
    }
  }
  if (stop_reason != "diverged") out.params = xi;
  out.iterations = std::min(iter, cfg.stop.max_iters);
  out.stop_reason = stop_reason;
  return out;
}

TrainResult nls_train(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                      const ctrl::ControlNetSpec& control,
                      const std::vector<rom::ParamVector>& theta_samples,
                      const rom::DomainSampler& dom, const NlsConfig& cfg,
                      const ProgressFn& progress) {
  if (theta_samples.empty()) throw std::invalid_argument("nls: empty parameter sample set");
  const int m = model.param_count();
  const int d = model.d;
  const int B = std::min<int>(cfg.batch_theta, theta_samples.size());

  FieldProgram prog = build_field_program(model, op, control, cfg.mc_points, false);
  const int P = prog.n_params();

  Rng rng_init = make_rng(cfg.seed, 2);
  Rng rng_iter = make_rng(cfg.seed, 3);
  ctrl::ControlParams xi = ctrl::init_params(control, rng_init);
  opt::Adam adam(P, cfg.adam);

  const int threads = std::max(1, cfg.threads);
  std::vector<FieldEval> evals;
  evals.reserve(threads);
  for (int w = 0; w < threads; ++w) evals.emplace_back(prog);
  const bool use_rho = std::holds_alternative<rom::RhoDomain>(dom);

  TrainResult out;
  out.params = xi;
  StopTracker tracker;
  Timer timer;
  std::string stop_reason = "max_iters";
  ctrl::ControlParams last_good = xi;

  std::vector<double> shared_pts(std::size_t(cfg.mc_points) * d), shared_wts(cfg.mc_points);
  std::vector<double> grads, losses_v, grad(P);

  int iter = 0;
  for (iter = 1; iter <= cfg.stop.max_iters; ++iter) {
    std::vector<int> bidx =
        draw_batch_indices(static_cast<int>(theta_samples.size()), B, rng_iter);
    std::vector<double> job_pts, job_wts;
    if (use_rho) {
      job_pts.resize(std::size_t(B) * cfg.mc_points * d);
      job_wts.resize(std::size_t(B) * cfg.mc_points);
      for (int i = 0; i < B; ++i)
        rom::sample_domain(dom, model, theta_samples[bidx[i]].values, cfg.mc_points, rng_iter,
                           std::span<double>(job_pts).subspan(std::size_t(i) * cfg.mc_points * d,
                                                              std::size_t(cfg.mc_points) * d),
                           std::span<double>(job_wts).subspan(std::size_t(i) * cfg.mc_points,
                                                              cfg.mc_points));
    } else {
      rom::sample_domain(dom, model, {}, cfg.mc_points, rng_iter, shared_pts, shared_wts);
    }

    grads.assign(std::size_t(B) * P, 0.0);
    losses_v.assign(B, 0.0);
    std::vector<double> zero_cot(m, 0.0);
    std::vector<std::string> errors(threads);
    parallel_for(B, threads, [&](int i, int w) {
      try {
        FieldEval& ev = evals[w];
        ev.set_xi(xi.values);
        if (use_rho)
          ev.set_points(std::span<const double>(job_pts).subspan(
                            std::size_t(i) * cfg.mc_points * d, std::size_t(cfg.mc_points) * d),
                        std::span<const double>(job_wts).subspan(std::size_t(i) * cfg.mc_points,
                                                                 cfg.mc_points));
        else
          ev.set_points(shared_pts, shared_wts);
        std::vector<double> dth(m);
        losses_v[i] = ev.running_cost(theta_samples[bidx[i]].values);
        ev.vjp(theta_samples[bidx[i]].values, zero_cot, 1.0, dth,
               {grads.data() + std::size_t(i) * P, std::size_t(P)}, 1.0, true);
      } catch (const std::exception& e) {
        errors[w] = e.what();
      }
    });
    for (const auto& e : errors)
      if (!e.empty()) throw std::runtime_error("nls: failure: " + e);

    double loss = 0.0;
    fill(grad, 0.0);
    for (int i = 0; i < B; ++i) {
      loss += losses_v[i] / B;
      axpy(1.0 / B, {grads.data() + std::size_t(i) * P, std::size_t(P)}, grad);
    }
    if (!std::isfinite(loss) || !all_finite(grad)) {
      out.params = last_good;
      stop_reason = "diverged";
      --iter;
      break;
    }
    last_good = xi;
    adam.step(xi.values, grad);
    LossRow row{iter, loss, norm2(grad), timer.seconds()};
    tracker.losses.push_back(loss);
    out.history.push_back(row);
    if (progress) progress(row);
    if (cfg.stop.loss_floor > 0.0 && loss < cfg.stop.loss_floor) {
      stop_reason = "loss_floor";
      break;
    }
    if (iter >= cfg.stop.min_iters && tracker.pct_rule_met(cfg.stop)) {
      stop_reason = "converged";
      break;
    }
  }
  if (stop_reason != "diverged") out.params = xi;
  out.iterations = std::min(iter, cfg.stop.max_iters);
  out.stop_reason = stop_reason;
  return out;
}

}  // namespace pf::train
