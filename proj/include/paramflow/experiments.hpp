// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment pipelines shared by the CLI and the acceptance suite: training
// runs (with optional time-marching targets and the least-squares baseline),
// batched solves, error-curve evaluation against the per-experiment oracle,
// the controlled-diffusion demonstration, and the reproduce driver that
// chains them and checks stored thresholds.

#include <optional>

#include "paramflow/config.hpp"
#include "paramflow/csvplot.hpp"
#include "paramflow/galerkin.hpp"
#include "paramflow/oracle.hpp"
#include "paramflow/serialize.hpp"

namespace pf::cli {

// fit failure in solve; the CLI maps this to exit code 4
struct FitError : std::runtime_error {
  double achieved;
  FitError(const std::string& msg, double mis) : std::runtime_error(msg), achieved(mis) {}
};

struct TrainArtifacts {
  train::TrainResult main;
  std::optional<train::TrainResult> nls;
  std::optional<oracle::MarchResult> march;
};

// Trains per config, writing checkpoint(.json/.bin), training.csv, the
// resolved config snapshot, and (when enabled) the baseline checkpoint.
TrainArtifacts run_training(const ExperimentConfig& cfg, const std::string& outdir);

// Integrates theta' = V(theta) for each initial; trajectories carry theta
// only. NaN states surface as std::runtime_error.
std::vector<ode::Trajectory> solve_batch(const ExperimentConfig& cfg,
                                         const ctrl::ControlParams& xi,
                                         const std::vector<rom::ParamVector>& initials,
                                         const ode::SolverSpec& solver);

// Held-out evaluation initials for the experiment (disjoint rng stream).
std::vector<rom::ParamVector> sample_eval_initials(const ExperimentConfig& cfg, int count,
                                                   Rng& rng);

// Per-initial relative-error curves against the configured oracle, and their
// aggregate. The evaluation grid is n_time points over (0, horizon].
struct EvalArtifacts {
  std::vector<std::vector<oracle::ErrPoint>> curves;
  oracle::CurveStats stats;
};
EvalArtifacts evaluate_trajectories(const ExperimentConfig& cfg,
                                    const std::vector<rom::ParamVector>& initials,
                                    const std::vector<ode::Trajectory>& trajectories,
                                    std::uint64_t eval_seed);

// Controlled-diffusion demonstration: common-random-number comparison of the
// learned feedback control against zero control, per terminal cost.
struct SdeDemoResult {
  std::vector<double> cost_controlled;  // mean over paths of running + terminal
  std::vector<double> cost_zero;        // mean terminal cost of the driftless twin
  int wins = 0;                         // costs where controlled < zero
};
SdeDemoResult run_sde_demo(const ExperimentConfig& cfg, const ctrl::ControlParams& xi,
                           const std::vector<rom::ParamVector>& terminal_costs,
                           const std::string& outdir);

struct ReproduceOutcome {
  bool pass = true;
  std::string summary_path;
  oracle::CurveStats stats;
  std::optional<oracle::CurveStats> nls_stats;
  std::optional<SdeDemoResult> sde;
};

ReproduceOutcome reproduce(const ExperimentConfig& cfg, const std::string& outdir);

}  // namespace pf::cli
