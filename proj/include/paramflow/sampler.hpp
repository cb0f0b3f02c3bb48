// SPDX-License-Identifier: Apache-2.0
#pragma once

// Initial-condition samplers over parameter space and Monte-Carlo samplers
// over the spatial domain.

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "paramflow/model.hpp"
#include "paramflow/util.hpp"

namespace pf::rom {

// Uniform in the ball |theta| <= radius.
struct UniformBallSampler {
  double radius = 20.0;
};

// Isotropic N(mean, variance * I).
struct GaussianSampler {
  double mean = 0.0;
  double variance = 0.5;
};

// Two-component pool: uniform ball with probability ball_fraction, isotropic
// Gaussian otherwise.
struct MixedBallGaussSampler {
  double radius = 20.0;
  double variance = 0.5;
  double ball_fraction = 2.0 / 3.0;
};

// PeriodicSineTanh composite: a_i, beta ~ N(0, I), b_i ~ N(0,1), c uniform on
// the unit sphere. one_d_structure restricts a_i to (a_i1, 0, ..., 0).
struct SineTanhCompositeSampler {
  bool one_d_structure = false;
  bool shared_beta = false;  // draw one beta per sample (always true here; kept
                             // as an explicit knob, see trailing comment)
};

// GaussianMixture box: w_i ~ U(-1,0), a uniform on [-2,2]^d conditioned on
// |a_i|_inf > 0.1, b uniform on [-2,2]^d.
struct HjbBoxSampler {
  double a_min = 0.1;
  double a_max = 2.0;
  double b_max = 2.0;
};

using InitSampler = std::variant<UniformBallSampler, GaussianSampler, MixedBallGaussSampler,
                                 SineTanhCompositeSampler, HjbBoxSampler>;

ParamVector sample_initial(const InitSampler& s, const ModelSpec& ms, Rng& rng);

std::vector<ParamVector> sample_initials(const InitSampler& s, const ModelSpec& ms, int count,
                                         Rng& rng);

// ---- spatial-domain samplers ----

// Points in a box with constant importance weight = volume, so that
// (1/N) sum w f(x_n) estimates the integral over the box.
struct BoxDomain {
  double lo = -1.0;
  double hi = 1.0;
};

// Mixture proposal rho(x; theta) = (1/n) sum_i N(x - b_i, diag(a_i)^-2) for
// GaussianMixture models on unbounded domains; weights are 1 / rho.
struct RhoDomain {};

using DomainSampler = std::variant<BoxDomain, RhoDomain>;

// Fills pts (N*d) and wts (N). theta is consulted by RhoDomain only.
void sample_domain(const DomainSampler& dom, const ModelSpec& ms, std::span<const double> theta,
                   int count, Rng& rng, std::span<double> pts, std::span<double> wts);

// density of the mixture proposal at x (used by the sampler and by tests)
double rho_density(const ModelSpec& ms, std::span<const double> theta, std::span<const double> x);

// Draws one x ~ rho(.;theta) and returns its importance weight 1/rho(x).
double sample_rho(const ModelSpec& ms, std::span<const double> theta, Rng& rng,
                  std::span<double> x_out);

}  // namespace pf::rom
