// SPDX-License-Identifier: Apache-2.0
#include "paramflow/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "paramflow/util.hpp"

namespace pf::cli {

namespace {

using KvMap = std::map<std::string, std::string>;  // "section.key" -> value

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

KvMap parse_kv(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
      val = val.substr(1, val.size() - 2);
    kv[section.empty() ? key : section + "." + key] = val;
  }
  return kv;
}

struct Reader {
  KvMap kv;
  std::string get_str(const std::string& key, const std::string& def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    std::string v = it->second;
    kv.erase(it);
    return v;
  }
  double get_num(const std::string& key, double def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    try {
      double v = std::stod(it->second);
      kv.erase(it);
      return v;
    } catch (...) {
      throw ConfigError("config: key '" + key + "' is not a number: " + it->second);
    }
  }
  int get_int(const std::string& key, int def) {
    double v = get_num(key, def);
    if (v != static_cast<int>(v))
      throw ConfigError("config: key '" + key + "' must be an integer");
    return static_cast<int>(v);
  }
  bool get_bool(const std::string& key, bool def) {
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    std::string v = it->second;
    kv.erase(it);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' must be true/false");
  }
};

std::vector<int> parse_modes(const std::string& text, int d) {
  // rows separated by ';', entries by spaces or commas
  std::vector<int> out;
  std::string row;
  std::istringstream in(text);
  while (std::getline(in, row, ';')) {
    std::istringstream rs(row);
    std::string tok;
    int cnt = 0;
    while (rs >> tok) {
      if (!tok.empty() && tok.back() == ',') tok.pop_back();
      if (tok.empty()) continue;
      out.push_back(std::stoi(tok));
      ++cnt;
    }
    if (cnt != d) throw ConfigError("config: modes row '" + row + "' must have d entries");
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config: " + key + " " + why);
  };
  if (name != "heat" && name != "tanh_flux" && name != "hjb" && name != "custom")
    fail("experiment.name", "must be heat | tanh_flux | hjb | custom");
  if (model.d < 1) fail("model.d", "must be >= 1");
  if (model.n < 1) fail("model.n", "must be >= 1");
  if (model.family == rom::Family::SineModes &&
      static_cast<int>(model.modes.size()) != model.n * model.d)
    fail("model.modes", "must list n rows of d integers");
  try {
    op.validate();
  } catch (const std::exception& e) {
    fail("operator", e.what());
  }
  if (control.m != model.param_count())
    fail("control", "dimension m=" + std::to_string(control.m) +
                        " must equal the model parameter count " +
                        std::to_string(model.param_count()));
  try {
    control.validate();
  } catch (const std::exception& e) {
    fail("control", e.what());
  }
  if (train.batch < 1) fail("train.batch", "must be >= 1");
  if (train.batch > train.pool) fail("train.batch", "must be <= train.pool");
  if (train.mc_points < 1) fail("train.mc_points", "must be >= 1");
  if (!(train.horizon > 0)) fail("train.horizon", "must be > 0");
  if (train.rollout_steps < 1) fail("train.rollout_steps", "must be >= 1");
  if (train.stop.max_iters < 1) fail("train.iterations", "must be >= 1");
  if (targets.size < 0) fail("targets.size", "must be >= 0");
  if (targets.size > 0 && (targets.steps < 1 || !(targets.dt > 0)))
    fail("targets", "needs steps >= 1 and dt > 0");
  if (eval.initials < 1) fail("eval.initials", "must be >= 1");
  if (eval.oracle != "heat_spectral" && eval.oracle != "heat_mc" && eval.oracle != "upwind" &&
      eval.oracle != "cole_hopf")
    fail("eval.oracle", "must be heat_spectral | heat_mc | upwind | cole_hopf");
  if (eval.oracle == "heat_spectral" && model.d > 3)
    fail("eval.oracle", "heat_spectral supports d <= 3; use heat_mc");
  const std::string& sk = sampler.kind;
  if (sk != "uniform_ball" && sk != "gaussian" && sk != "mixed_ball_gauss" &&
      sk != "sine_tanh_composite" && sk != "hjb_box")
    fail("sampler.kind", "unknown sampler '" + sk + "'");
  if ((sk == "sine_tanh_composite") && model.family != rom::Family::PeriodicSineTanh)
    fail("sampler.kind", "sine_tanh_composite requires the periodic_sine_tanh family");
  if (sk == "hjb_box" && model.family != rom::Family::GaussianMixture)
    fail("sampler.kind", "hjb_box requires the gaussian_mixture family");
}

rom::InitSampler ExperimentConfig::make_pool_sampler() const {
  if (sampler.kind == "uniform_ball") return rom::UniformBallSampler{sampler.radius};
  if (sampler.kind == "gaussian") return rom::GaussianSampler{0.0, sampler.variance};
  if (sampler.kind == "mixed_ball_gauss")
    return rom::MixedBallGaussSampler{sampler.radius, sampler.variance, sampler.ball_fraction};
  if (sampler.kind == "sine_tanh_composite")
    return rom::SineTanhCompositeSampler{sampler.one_d_structure, false};
  if (sampler.kind == "hjb_box") return rom::HjbBoxSampler{};
  throw ConfigError("config: sampler.kind unknown '" + sampler.kind + "'");
}

rom::DomainSampler ExperimentConfig::make_domain() const {
  if (model.family == rom::Family::GaussianMixture) return rom::RhoDomain{};
  return rom::BoxDomain{-1.0, 1.0};
}

std::string ExperimentConfig::resolved_text() const {
  std::ostringstream o;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  o << "[experiment]\n";
  o << "name = " << name << "\n";
  o << "scale = " << scale << "\n";
  o << "seed = " << seed << "\n";
  o << "output = " << output << "\n";
  o << "threads = " << threads << "\n";
  o << "deterministic = " << (deterministic ? "true" : "false") << "\n\n";
  o << "[model]\n";
  o << "family = " << rom::family_name(model.family) << "\n";
  o << "d = " << model.d << "\n";
  o << "n = " << model.n << "\n";
  if (model.family == rom::Family::SineModes) {
    o << "modes = ";
    for (int i = 0; i < model.n; ++i) {
      for (int j = 0; j < model.d; ++j) o << model.modes[i * model.d + j] << (j + 1 < model.d ? " " : "");
      if (i + 1 < model.n) o << "; ";
    }
    o << "\n";
  }
  o << "\n[operator]\n";
  o << "kind = " << pde::op_name(op.kind) << "\n";
  o << "epsilon = " << num(op.epsilon) << "\n";
  o << "speed = " << num(op.speed) << "\n";
  o << "\n[control]\n";
  o << "width = " << control.width << "\n";
  o << "depth = " << control.depth << "\n";
  o << "\n[sampler]\n";
  o << "kind = " << sampler.kind << "\n";
  o << "radius = " << num(sampler.radius) << "\n";
  o << "variance = " << num(sampler.variance) << "\n";
  o << "ball_fraction = " << num(sampler.ball_fraction) << "\n";
  o << "one_d_structure = " << (sampler.one_d_structure ? "true" : "false") << "\n";
  o << "\n[train]\n";
  o << "iterations = " << train.stop.max_iters << "\n";
  o << "min_iterations = " << train.stop.min_iters << "\n";
  o << "batch = " << train.batch << "\n";
  o << "pool = " << train.pool << "\n";
  o << "mc_points = " << train.mc_points << "\n";
  o << "horizon = " << num(train.horizon) << "\n";
  o << "rollout_steps = " << train.rollout_steps << "\n";
  o << "lr = " << num(train.adam.lr) << "\n";
  o << "beta1 = " << num(train.adam.beta1) << "\n";
  o << "beta2 = " << num(train.adam.beta2) << "\n";
  o << "stop_window = " << train.stop.window << "\n";
  o << "stop_pct = " << num(train.stop.pct) << "\n";
  o << "loss_floor = " << num(train.stop.loss_floor) << "\n";
  o << "aug_weight = " << num(train.aug_weight) << "\n";
  o << "aug_batch = " << train.aug_batch << "\n";
  o << "terminal_mc = " << train.terminal_mc << "\n";
  o << "h1_mode = " << (train.h1_mode ? "true" : "false") << "\n";
  o << "\n[targets]\n";
  o << "size = " << targets.size << "\n";
  o << "dt = " << num(targets.dt) << "\n";
  o << "steps = " << targets.steps << "\n";
  o << "lambda = " << num(targets.lambda) << "\n";
  o << "mc_points = " << targets.mc_points << "\n";
  o << "one_d_structure = " << (targets.one_d_structure ? "true" : "false") << "\n";
  o << "\n[nls]\n";
  o << "enabled = " << (nls.enabled ? "true" : "false") << "\n";
  o << "pool_ball = " << nls.pool_ball << "\n";
  o << "pool_gauss = " << nls.pool_gauss << "\n";
  o << "batch_theta = " << nls.batch_theta << "\n";
  o << "mc_points = " << nls.mc_points << "\n";
  o << "iterations = " << nls.iterations << "\n";
  o << "\n[eval]\n";
  o << "initials = " << eval.initials << "\n";
  o << "mc_points = " << eval.mc_points << "\n";
  o << "n_time = " << eval.n_time << "\n";
  o << "oracle = " << eval.oracle << "\n";
  o << "spectral_modes = " << eval.spectral_modes << "\n";
  o << "spectral_grid = " << eval.spectral_grid << "\n";
  o << "heat_mc = " << eval.heat_mc << "\n";
  o << "cole_hopf_mc = " << eval.cole_hopf_mc << "\n";
  o << "upwind_nt = " << eval.upwind_nt << "\n";
  o << "upwind_nx = " << eval.upwind_nx << "\n";
  o << "fit_tolerance = " << num(eval.fit_tolerance) << "\n";
  o << "fit_iters = " << eval.fit_iters << "\n";
  o << "\n[sde]\n";
  o << "dt = " << num(sde.dt) << "\n";
  o << "paths = " << sde.paths << "\n";
  o << "starts = " << sde.starts << "\n";
  o << "terminal_costs = " << sde.terminal_costs << "\n";
  o << "start_box = " << num(sde.start_box) << "\n";
  return o.str();
}

std::string ExperimentConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_text())));
  return buf;
}

ExperimentConfig parse_config_text(const std::string& text) {
  Reader r{parse_kv(text)};
  ExperimentConfig c;
  c.name = r.get_str("experiment.name", c.name);
  c.scale = r.get_str("experiment.scale", c.scale);
  c.seed = static_cast<std::uint64_t>(r.get_num("experiment.seed", double(c.seed)));
  c.output = r.get_str("experiment.output", c.output);
  c.threads = r.get_int("experiment.threads", c.threads);
  c.deterministic = r.get_bool("experiment.deterministic", c.deterministic);

  if (!r.kv.count("model.family")) throw ConfigError("config: missing key model.family");
  std::string fam = r.get_str("model.family", "");
  c.model.family = rom::family_from_name(fam);
  c.model.d = r.get_int("model.d", 0);
  c.model.n = r.get_int("model.n", 0);
  if (c.model.d < 1) throw ConfigError("config: missing or bad key model.d");
  if (c.model.family == rom::Family::SineModes) {
    std::string modes = r.get_str("model.modes", "");
    if (modes.empty()) throw ConfigError("config: missing key model.modes");
    c.model.modes = parse_modes(modes, c.model.d);
    c.model.n = static_cast<int>(c.model.modes.size()) / c.model.d;
  }
  if (c.model.n < 1) throw ConfigError("config: missing or bad key model.n");

  if (!r.kv.count("operator.kind")) throw ConfigError("config: missing key operator.kind");
  c.op.kind = pde::op_from_name(r.get_str("operator.kind", ""));
  c.op.epsilon = r.get_num("operator.epsilon", c.op.epsilon);
  c.op.speed = r.get_num("operator.speed", c.op.speed);

  c.control.m = c.model.param_count();
  c.control.width = r.get_int("control.width", 64);
  c.control.depth = r.get_int("control.depth", 3);

  c.sampler.kind = r.get_str("sampler.kind", c.sampler.kind);
  c.sampler.radius = r.get_num("sampler.radius", c.sampler.radius);
  c.sampler.variance = r.get_num("sampler.variance", c.sampler.variance);
  c.sampler.ball_fraction = r.get_num("sampler.ball_fraction", c.sampler.ball_fraction);
  c.sampler.one_d_structure = r.get_bool("sampler.one_d_structure", false);

  c.train.stop.max_iters = r.get_int("train.iterations", c.train.stop.max_iters);
  c.train.stop.min_iters = r.get_int("train.min_iterations", 0);
  c.train.batch = r.get_int("train.batch", c.train.batch);
  c.train.pool = r.get_int("train.pool", c.train.pool);
  c.train.mc_points = r.get_int("train.mc_points", c.train.mc_points);
  c.train.horizon = r.get_num("train.horizon", c.train.horizon);
  c.train.rollout_steps = r.get_int("train.rollout_steps", c.train.rollout_steps);
  c.train.adam.lr = r.get_num("train.lr", c.train.adam.lr);
  c.train.adam.beta1 = r.get_num("train.beta1", c.train.adam.beta1);
  c.train.adam.beta2 = r.get_num("train.beta2", c.train.adam.beta2);
  c.train.stop.window = r.get_int("train.stop_window", c.train.stop.window);
  c.train.stop.pct = r.get_num("train.stop_pct", c.train.stop.pct);
  c.train.stop.loss_floor = r.get_num("train.loss_floor", 0.0);
  c.train.aug_weight = r.get_num("train.aug_weight", c.train.aug_weight);
  c.train.aug_batch = r.get_int("train.aug_batch", 0);
  c.train.terminal_mc = r.get_int("train.terminal_mc", c.train.terminal_mc);
  c.train.h1_mode = r.get_bool("train.h1_mode", false);

  c.targets.size = r.get_int("targets.size", 0);
  c.targets.dt = r.get_num("targets.dt", c.targets.dt);
  c.targets.steps = r.get_int("targets.steps", c.targets.steps);
  c.targets.lambda = r.get_num("targets.lambda", c.targets.lambda);
  c.targets.mc_points = r.get_int("targets.mc_points", c.targets.mc_points);
  c.targets.one_d_structure = r.get_bool("targets.one_d_structure", false);

  c.nls.enabled = r.get_bool("nls.enabled", false);
  c.nls.pool_ball = r.get_int("nls.pool_ball", c.nls.pool_ball);
  c.nls.pool_gauss = r.get_int("nls.pool_gauss", c.nls.pool_gauss);
  c.nls.batch_theta = r.get_int("nls.batch_theta", c.nls.batch_theta);
  c.nls.mc_points = r.get_int("nls.mc_points", c.nls.mc_points);
  c.nls.iterations = r.get_int("nls.iterations", c.nls.iterations);

  c.eval.initials = r.get_int("eval.initials", c.eval.initials);
  c.eval.mc_points = r.get_int("eval.mc_points", c.eval.mc_points);
  c.eval.n_time = r.get_int("eval.n_time", c.eval.n_time);
  c.eval.oracle = r.get_str("eval.oracle", c.eval.oracle);
  c.eval.spectral_modes = r.get_int("eval.spectral_modes", c.eval.spectral_modes);
  c.eval.spectral_grid = r.get_int("eval.spectral_grid", c.eval.spectral_grid);
  c.eval.heat_mc = r.get_int("eval.heat_mc", c.eval.heat_mc);
  c.eval.cole_hopf_mc = r.get_int("eval.cole_hopf_mc", c.eval.cole_hopf_mc);
  c.eval.upwind_nt = r.get_int("eval.upwind_nt", c.eval.upwind_nt);
  c.eval.upwind_nx = r.get_int("eval.upwind_nx", c.eval.upwind_nx);
  c.eval.fit_tolerance = r.get_num("eval.fit_tolerance", c.eval.fit_tolerance);
  c.eval.fit_iters = r.get_int("eval.fit_iters", c.eval.fit_iters);

  c.sde.dt = r.get_num("sde.dt", c.sde.dt);
  c.sde.paths = r.get_int("sde.paths", c.sde.paths);
  c.sde.starts = r.get_int("sde.starts", c.sde.starts);
  c.sde.terminal_costs = r.get_int("sde.terminal_costs", c.sde.terminal_costs);
  c.sde.start_box = r.get_num("sde.start_box", c.sde.start_box);

  if (!r.kv.empty())
    throw ConfigError("config: unknown key '" + r.kv.begin()->first + "'");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot write '" + path + "'");
  f << cfg.resolved_text();
}

ExperimentConfig default_config(const std::string& experiment, const std::string& scale) {
  const bool paper = scale == "paper";
  if (!paper && scale != "desk")
    throw ConfigError("config: scale must be desk or paper, got '" + scale + "'");
  ExperimentConfig c;
  c.name = experiment;
  c.scale = scale;
  if (experiment == "heat") {
    c.model = paper ? rom::ModelSpec::periodic_sine_tanh(10, 80)
                    : rom::ModelSpec::periodic_sine_tanh(2, 10);
    c.op = {pde::OpKind::Heat, 0.2, 2.0};
    c.control = {c.model.param_count(), paper ? 1000 : 64, paper ? 5 : 3};
    c.sampler.kind = "mixed_ball_gauss";
    c.train.horizon = 0.1;
    c.train.batch = paper ? 100 : 8;
    c.train.pool = paper ? 150000 : 2048;
    c.train.mc_points = paper ? 200 : 64;
    c.train.stop.max_iters = paper ? 10000 : 2000;
    c.train.stop.min_iters = paper ? 0 : 2000;  // desk runs the full budget
    c.eval.oracle = paper ? "heat_mc" : "heat_spectral";
    c.eval.initials = paper ? 100 : 20;
    c.eval.n_time = 10;  // grid 0.01, 0.02, ..., 0.1
    c.nls.enabled = !paper;  // the desk run carries the baseline comparison
    c.nls.pool_ball = paper ? 100000 : 30000;
    c.nls.pool_gauss = paper ? 50000 : 15000;
    // matched budget: roughly equal residual-tape passes per optimizer step
    c.nls.batch_theta = paper ? 8000 : c.train.batch * c.train.rollout_steps * 4;
    c.nls.mc_points = c.train.mc_points;
    c.nls.iterations = c.train.stop.max_iters;
  } else if (experiment == "tanh_flux") {
    c.model = paper ? rom::ModelSpec::periodic_sine_tanh(10, 80)
                    : rom::ModelSpec::periodic_sine_tanh(2, 12);
    c.op = {pde::OpKind::TanhFlux, 0.2, 2.0};
    c.control = {c.model.param_count(), paper ? 600 : 64, paper ? 5 : 3};
    c.sampler.kind = "sine_tanh_composite";
    c.train.horizon = 0.15;
    c.train.batch = paper ? 100 : 8;
    c.train.pool = paper ? 20000 : 2048;
    c.train.mc_points = paper ? 200 : 64;
    c.train.stop.max_iters = paper ? 10000 : 2500;
    c.train.stop.min_iters = paper ? 0 : 2500;
    c.train.aug_batch = paper ? 100 : 8;
    c.targets.size = paper ? 1000 : 128;
    c.targets.dt = 1.5e-3;
    c.targets.steps = 100;  // marches to T = 0.15
    c.targets.one_d_structure = true;
    c.eval.oracle = "upwind";
    c.eval.initials = paper ? 100 : 10;
    c.eval.upwind_nt = paper ? 4000 : 2000;
    c.eval.upwind_nx = paper ? 1000 : 500;
  } else if (experiment == "hjb") {
    c.model = paper ? rom::ModelSpec::gaussian_mixture(8, 50)
                    : rom::ModelSpec::gaussian_mixture(2, 8);
    c.op = {pde::OpKind::Hjb, 0.2, 2.0};
    c.control = {c.model.param_count(), paper ? 1000 : 64, paper ? 5 : 3};
    c.sampler.kind = "hjb_box";
    c.train.horizon = 1.0;
    c.train.batch = paper ? 512 : 8;
    c.train.pool = paper ? 100000 : 2048;
    c.train.mc_points = paper ? 200 : 64;
    c.train.stop.max_iters = paper ? 10000 : 2500;
    c.train.stop.min_iters = paper ? 0 : 2500;
    c.train.aug_batch = paper ? 64 : 8;
    c.targets.size = paper ? 250 : 64;
    c.targets.dt = 1e-2;
    c.targets.steps = 100;  // marches to T = 1
    c.eval.oracle = "cole_hopf";
    c.eval.initials = paper ? 100 : 10;
    c.eval.mc_points = paper ? 2048 : 256;
    c.eval.n_time = 6;
    c.sde.terminal_costs = 10;
  } else {
    throw ConfigError("config: unknown experiment '" + experiment +
                      "' (expected heat | tanh_flux | hjb)");
  }
  c.output = "out/" + experiment + "_" + scale;
  c.validate();
  return c;
}

}  // namespace pf::cli
