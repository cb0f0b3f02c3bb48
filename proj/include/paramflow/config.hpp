// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain-text experiment configuration: [section] headers with key = value
// lines, full defaults per shipped experiment, flag overrides on top. The
// resolved text render is hashed into every output file.

#include <map>
#include <optional>
#include <string>

#include "paramflow/control.hpp"
#include "paramflow/model.hpp"
#include "paramflow/operators.hpp"
#include "paramflow/sampler.hpp"
#include "paramflow/trainer.hpp"

namespace pf::cli {

// invalid configuration; the CLI maps this to exit code 2
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplerConfig {
  std::string kind = "gaussian";  // uniform_ball | gaussian | mixed_ball_gauss |
                                  // sine_tanh_composite | hjb_box
  double radius = 20.0;
  double variance = 0.5;
  double ball_fraction = 2.0 / 3.0;  // mixed_ball_gauss
  bool one_d_structure = false;      // sine_tanh_composite
};

struct TargetsConfig {
  int size = 0;  // 0 disables augmentation
  double dt = 1.5e-3;
  int steps = 100;
  double lambda = 1e-8;
  int mc_points = 256;
  bool one_d_structure = false;  // sample marching starts with 1-d structure
};

struct NlsRunConfig {
  bool enabled = false;
  int pool_ball = 30000;
  int pool_gauss = 15000;
  int batch_theta = 480;
  int mc_points = 64;
  int iterations = 2000;
};

struct EvalConfig {
  int initials = 20;
  int mc_points = 2048;
  int n_time = 11;           // evaluation grid: n_time points over (0, horizon]
  std::string oracle = "heat_spectral";  // heat_spectral | heat_mc | upwind | cole_hopf
  int spectral_modes = 16;
  int spectral_grid = 48;
  int heat_mc = 20000;
  int cole_hopf_mc = 20000;
  int upwind_nt = 2000;
  int upwind_nx = 500;
  double fit_tolerance = 1e-3;
  int fit_iters = 1500;
};

struct SdeConfig {
  double dt = 1e-3;
  int paths = 1000;
  int starts = 50;
  int terminal_costs = 10;
  double start_box = 1.5;  // X(0) ~ U([-box, box]^min(d,2) x [-1,1]^rest)
};

struct ExperimentConfig {
  std::string name = "heat";  // heat | tanh_flux | hjb | custom
  std::string scale = "desk";
  std::uint64_t seed = 1234;
  std::string output = "out";
  int threads = 2;
  bool deterministic = false;  // force single-threaded execution

  rom::ModelSpec model;
  pde::OperatorSpec op;
  ctrl::ControlNetSpec control;
  SamplerConfig sampler;
  train::TrainConfig train;
  TargetsConfig targets;
  NlsRunConfig nls;
  EvalConfig eval;
  SdeConfig sde;

  // cross-field consistency; throws ConfigError naming the offending key
  void validate() const;
  // canonical text render (also the on-disk config format)
  std::string resolved_text() const;
  std::string hash() const;

  rom::InitSampler make_pool_sampler() const;
  rom::DomainSampler make_domain() const;
  int effective_threads() const { return deterministic ? 1 : std::max(1, threads); }
};

// shipped defaults; scale is "desk" or "paper"
ExperimentConfig default_config(const std::string& experiment, const std::string& scale);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

}  // namespace pf::cli
