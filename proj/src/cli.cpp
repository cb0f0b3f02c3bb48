// SPDX-License-Identifier: Apache-2.0
#include "paramflow/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "paramflow/experiments.hpp"
#include "paramflow/fit.hpp"

namespace pf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0, kExitConfig = 2, kExitTrainAbort = 3, kExitFit = 4;

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::int64_t seed = -1;
  int threads = 0;
  bool deterministic = false;
};

ExperimentConfig load_with_overrides(const CommonFlags& fl, int iterations = 0) {
  ExperimentConfig cfg = load_config(fl.config_path);
  if (fl.seed >= 0) cfg.seed = static_cast<std::uint64_t>(fl.seed);
  if (fl.threads > 0) cfg.threads = fl.threads;
  if (fl.deterministic) cfg.deterministic = true;
  if (!fl.out.empty()) cfg.output = fl.out;
  if (iterations > 0) {
    cfg.train.stop.max_iters = iterations;
    cfg.train.stop.min_iters = std::min(cfg.train.stop.min_iters, iterations);
  }
  cfg.validate();
  return cfg;
}

int do_train(const CommonFlags& fl, int iterations) {
  ExperimentConfig cfg = load_with_overrides(fl, iterations);
  auto art = run_training(cfg, cfg.output);
  std::cout << "trained " << cfg.name << " for " << art.main.iterations
            << " iterations (stop: " << art.main.stop_reason << "), final loss "
            << (art.main.history.empty() ? 0.0 : art.main.history.back().loss) << "\n";
  std::cout << "checkpoint: " << cfg.output << "/checkpoint.json\n";
  if (art.main.stop_reason == "diverged") {
    std::cerr << "training aborted: loss diverged; last good checkpoint retained\n";
    return kExitTrainAbort;
  }
  return kExitOk;
}

int do_solve(const CommonFlags& fl, const std::string& checkpoint, const std::string& params,
             int sample_count, const std::string& sine_mode, const std::string& solver_name,
             int steps, double rtol, double atol) {
  ExperimentConfig cfg = load_with_overrides(fl);
  auto ck = io::load_checkpoint(checkpoint);

  ode::SolverSpec solver;
  solver.method = ode::method_from_name(solver_name);
  solver.steps = steps;
  solver.rtol = rtol;
  solver.atol = atol;

  std::vector<rom::ParamVector> initials;
  json fitinfo = json::array();
  if (!params.empty()) {
    initials.push_back(io::load_params(params));  // fitting skipped
  } else if (!sine_mode.empty()) {
    std::istringstream ss(sine_mode);
    std::vector<int> k;
    int v;
    while (ss >> v) k.push_back(v);
    if (static_cast<int>(k.size()) != cfg.model.d)
      throw ConfigError("solve: --sine needs d integers");
    rom::TargetFn g = [k](std::span<const double> x) {
      double p = 0;
      for (std::size_t j = 0; j < k.size(); ++j) p += rom::kPi * k[j] * x[j];
      return std::sin(p);
    };
    Rng rng = make_rng(cfg.seed, 10);
    rom::FitOptions fo;
    fo.tolerance = cfg.eval.fit_tolerance;
    fo.max_iters = cfg.eval.fit_iters;
    fo.lr = 1e-2;
    auto res = rom::fit_initial(cfg.model, g, cfg.make_domain(), fo, rng);
    fitinfo.push_back({{"rel_l2", res.rel_l2}, {"iterations", res.iterations}});
    std::cout << "fitted initial: relative L2 misfit " << res.rel_l2 << " after "
              << res.iterations << " iterations\n";
    if (!res.converged)
      throw FitError("solve: initial fit reached " + std::to_string(res.rel_l2) +
                         " > tolerance " + std::to_string(fo.tolerance),
                     res.rel_l2);
    initials.push_back(res.theta);
  } else {
    Rng rng = make_rng(cfg.seed, 6);
    initials = sample_eval_initials(cfg, std::max(1, sample_count), rng);
  }

  fs::create_directories(cfg.output);
  Timer timer;
  auto trajectories = solve_batch(cfg, ck.params, initials, solver);
  double secs = timer.seconds();
  long nfev = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    io::save_trajectory(cfg.output + "/trajectory_" + std::to_string(i), trajectories[i],
                        {cfg.seed, cfg.hash()}, true);
    nfev += trajectories[i].stats.nfev;
  }
  json s;
  s["initials"] = initials.size();
  s["solver"] = solver_name;
  s["seconds"] = secs;
  s["field_evaluations"] = nfev;
  s["fits"] = fitinfo;
  std::ofstream(cfg.output + "/solve_summary.json") << s.dump(2) << "\n";
  std::cout << "solved " << initials.size() << " initials in " << secs << " s ("
            << trajectories[0].points() << " stored points each)\n";
  return kExitOk;
}

int do_eval(const CommonFlags& fl, const std::vector<std::string>& traj_bases) {
  ExperimentConfig cfg = load_with_overrides(fl);
  std::vector<ode::Trajectory> trajectories;
  std::vector<rom::ParamVector> initials;
  for (const auto& base : traj_bases) {
    auto tr = io::load_trajectory(base);
    if (tr.dim != cfg.model.param_count())
      throw ConfigError("eval: trajectory dimension " + std::to_string(tr.dim) +
                        " does not match the model (" +
                        std::to_string(cfg.model.param_count()) + ")");
    rom::ParamVector th0(cfg.model);
    copy_to(tr.state(0), th0.values);
    initials.push_back(std::move(th0));
    trajectories.push_back(std::move(tr));
  }
  auto art = evaluate_trajectories(cfg, initials, trajectories, cfg.seed);
  fs::create_directories(cfg.output);
  const std::string prov = provenance_line(cfg.seed, cfg.hash());
  write_curve_csv(cfg.output + "/error_curve.csv", art.stats, prov);
  PlotOptions po;
  po.title = cfg.name + ": relative error vs reference";
  write_curve_svg(cfg.output + "/error_curve.svg", art.stats, po, prov);
  std::cout << "evaluated " << trajectories.size() << " trajectories; final mean error "
            << art.stats.mean.back() << "\n";
  std::cout << "wrote " << cfg.output << "/error_curve.csv and .svg\n";
  return kExitOk;
}

int do_reproduce(const std::string& experiment, const std::string& scale, std::string out,
                 std::int64_t seed, int threads, bool deterministic) {
  ExperimentConfig cfg = default_config(experiment, scale);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (threads > 0) cfg.threads = threads;
  cfg.deterministic = deterministic;
  if (out.empty()) out = cfg.output;
  cfg.output = out;
  auto res = reproduce(cfg, out);
  std::cout << "reproduce " << experiment << " (" << scale << "): "
            << (res.pass ? "PASS" : "FAIL") << "\n";
  std::cout << "summary: " << res.summary_path << "\n";
  return res.pass ? kExitOk : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"control-field learning for evolution-PDE solution operators"};
  app.require_subcommand(1);

  CommonFlags fl;
  int iterations = 0;

  auto add_common = [&](CLI::App* c, bool need_config) {
    auto* o = c->add_option("-c,--config", fl.config_path, "experiment config file");
    if (need_config) o->required();
    c->add_option("--out", fl.out, "output directory (overrides config)");
    c->add_option("--seed", fl.seed, "seed override");
    c->add_option("--threads", fl.threads, "worker threads");
    c->add_flag("--deterministic", fl.deterministic, "force single-threaded execution");
  };

  auto* t = app.add_subcommand("train", "train the control field per config");
  add_common(t, true);
  t->add_option("--iterations", iterations, "optimizer iteration override");

  auto* s = app.add_subcommand("solve", "integrate initial conditions under a trained field");
  add_common(s, true);
  std::string checkpoint, params, sine_mode, solver_name = "dopri5";
  int sample_count = 1, steps = 100;
  double rtol = 1e-6, atol = 1e-8;
  s->add_option("--checkpoint", checkpoint, "checkpoint base path (without .json)")->required();
  s->add_option("--initial-params", params, "parameter-file initial (fit skipped)");
  s->add_option("--sine", sine_mode, "fit g = sin(pi k.x); pass d integers");
  s->add_option("--sample", sample_count, "number of sampled held-out initials");
  s->add_option("--solver", solver_name, "euler | rk4 | dopri5");
  s->add_option("--steps", steps, "fixed-grid step count");
  s->add_option("--rtol", rtol, "dopri5 relative tolerance");
  s->add_option("--atol", atol, "dopri5 absolute tolerance");

  auto* e = app.add_subcommand("eval", "error curves for stored trajectories");
  add_common(e, true);
  std::vector<std::string> traj_bases;
  e->add_option("--trajectory", traj_bases, "trajectory base path(s)")->required();

  auto* r = app.add_subcommand("reproduce", "full train/solve/eval pipeline for an experiment");
  std::string experiment, scale = "desk", rout;
  std::int64_t rseed = -1;
  int rthreads = 0;
  bool rdet = false;
  r->add_option("experiment", experiment, "heat | tanh_flux | hjb")->required();
  r->add_option("--scale", scale, "desk | paper");
  r->add_option("--out", rout, "output directory");
  r->add_option("--seed", rseed, "seed override");
  r->add_option("--threads", rthreads, "worker threads");
  r->add_flag("--deterministic", rdet, "force single-threaded execution");

  auto* d = app.add_subcommand("config", "print the default config for an experiment");
  std::string dexp, dscale = "desk", dout;
  d->add_option("experiment", dexp, "heat | tanh_flux | hjb")->required();
  d->add_option("--scale", dscale, "desk | paper");
  d->add_option("-o,--output", dout, "write to file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    int rc = app.exit(pe);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (t->parsed()) return do_train(fl, iterations);
    if (s->parsed())
      return do_solve(fl, checkpoint, params, sample_count, sine_mode, solver_name, steps, rtol,
                      atol);
    if (e->parsed()) return do_eval(fl, traj_bases);
    if (r->parsed()) return do_reproduce(experiment, scale, rout, rseed, rthreads, rdet);
    if (d->parsed()) {
      ExperimentConfig cfg = default_config(dexp, dscale);
      if (dout.empty())
        std::cout << cfg.resolved_text();
      else
        save_config(dout, cfg);
      return kExitOk;
    }
  } catch (const ConfigError& ce) {
    std::cerr << "error: " << ce.what() << "\n";
    return kExitConfig;
  } catch (const FitError& fe) {
    std::cerr << "error: " << fe.what() << "\n";
    return kExitFit;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitTrainAbort;
  }
  return kExitConfig;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("paramflow");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pf::cli
