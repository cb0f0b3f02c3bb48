// SPDX-License-Identifier: Apache-2.0
#include "paramflow/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace pf::rom {

namespace {

void fill_gaussian(std::span<double> v, Rng& rng, double mean, double stddev) {
  for (double& e : v) e = normal(rng, mean, stddev);
}

ParamVector sample_uniform_ball(const UniformBallSampler& s, const ModelSpec& ms, Rng& rng) {
  ParamVector th(ms);
  const int m = ms.param_count();
  fill_gaussian(th.values, rng, 0.0, 1.0);
  double r = norm2(th.values);
  if (r == 0.0) r = 1.0;
  // radius ~ R * U^(1/m) gives the uniform ball density
  double scale = s.radius * std::pow(uniform(rng), 1.0 / m) / r;
  scal(scale, th.values);
  return th;
}

ParamVector sample_gaussian(const GaussianSampler& s, const ModelSpec& ms, Rng& rng) {
  ParamVector th(ms);
  fill_gaussian(th.values, rng, s.mean, std::sqrt(s.variance));
  return th;
}

ParamVector sample_sine_tanh(const SineTanhCompositeSampler& s, const ModelSpec& ms, Rng& rng) {
  if (ms.family != Family::PeriodicSineTanh)
    throw std::invalid_argument("sine_tanh sampler requires a PeriodicSineTanh model");
  ParamVector th(ms);
  auto& v = th.values;
  for (int j = 0; j < ms.d; ++j) v[ms.pst_beta() + j] = normal(rng);
  for (int i = 0; i < ms.n; ++i) {
    if (s.one_d_structure) {
      v[ms.pst_a(i)] = normal(rng);
      for (int j = 1; j < ms.d; ++j) v[ms.pst_a(i) + j] = 0.0;
    } else {
      for (int j = 0; j < ms.d; ++j) v[ms.pst_a(i) + j] = normal(rng);
    }
    v[ms.pst_b(i)] = normal(rng);
  }
  // c uniform on the unit sphere
  double nc = 0.0;
  for (int i = 0; i < ms.n; ++i) {
    v[ms.pst_c(i)] = normal(rng);
    nc += v[ms.pst_c(i)] * v[ms.pst_c(i)];
  }
  nc = std::sqrt(nc);
  if (nc == 0.0) nc = 1.0;
  for (int i = 0; i < ms.n; ++i) v[ms.pst_c(i)] /= nc;
  return th;
}

ParamVector sample_hjb_box(const HjbBoxSampler& s, const ModelSpec& ms, Rng& rng) {
  if (ms.family != Family::GaussianMixture)
    throw std::invalid_argument("hjb_box sampler requires a GaussianMixture model");
  ParamVector th(ms);
  auto& v = th.values;
  for (int i = 0; i < ms.n; ++i) {
    v[ms.gm_w(i)] = uniform(rng, -1.0, 0.0);
    // rejection on |a|_inf <= a_min; the accepted region is the box minus a
    // tiny cube, so this terminates almost immediately
    for (;;) {
      double amax = 0.0;
      for (int j = 0; j < ms.d; ++j) {
        v[ms.gm_a(i) + j] = uniform(rng, -s.a_max, s.a_max);
        amax = std::max(amax, std::abs(v[ms.gm_a(i) + j]));
      }
      if (amax > s.a_min) break;
    }
    for (int j = 0; j < ms.d; ++j) v[ms.gm_b(i) + j] = uniform(rng, -s.b_max, s.b_max);
  }
  return th;
}

}  // namespace

ParamVector sample_initial(const InitSampler& s, const ModelSpec& ms, Rng& rng) {
  return std::visit(
      [&](const auto& sampler) -> ParamVector {
        using T = std::decay_t<decltype(sampler)>;
        if constexpr (std::is_same_v<T, UniformBallSampler>)
          return sample_uniform_ball(sampler, ms, rng);
        else if constexpr (std::is_same_v<T, GaussianSampler>)
          return sample_gaussian(sampler, ms, rng);
        else if constexpr (std::is_same_v<T, MixedBallGaussSampler>) {
          if (uniform(rng) < sampler.ball_fraction)
            return sample_uniform_ball(UniformBallSampler{sampler.radius}, ms, rng);
          return sample_gaussian(GaussianSampler{0.0, sampler.variance}, ms, rng);
        } else if constexpr (std::is_same_v<T, SineTanhCompositeSampler>)
          return sample_sine_tanh(sampler, ms, rng);
        else
          return sample_hjb_box(sampler, ms, rng);
      },
      s);
}

std::vector<ParamVector> sample_initials(const InitSampler& s, const ModelSpec& ms, int count,
                                         Rng& rng) {
  if (count < 1) throw std::invalid_argument("sample_initials: count must be >= 1");
  std::vector<ParamVector> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sample_initial(s, ms, rng));
  return out;
}

double rho_density(const ModelSpec& ms, std::span<const double> theta,
                   std::span<const double> x) {
  const int d = ms.d, n = ms.n;
  // log-space mixture evaluation, shifted by the max exponent
  std::vector<double> logp(n);
  double mx = -1e300;
  for (int i = 0; i < n; ++i) {
    double lp = 0.0;
    for (int j = 0; j < d; ++j) {
      double a = theta[ms.gm_a(i) + j];
      if (a == 0.0) throw std::invalid_argument("rho: zero a component");
      double r = x[j] - theta[ms.gm_b(i) + j];
      lp += std::log(std::abs(a)) - 0.5 * std::log(2.0 * kPi) - 0.5 * a * a * r * r;
    }
    logp[i] = lp;
    mx = std::max(mx, lp);
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(logp[i] - mx);
  return std::exp(mx) * s / n;
}

double sample_rho(const ModelSpec& ms, std::span<const double> theta, Rng& rng,
                  std::span<double> x_out) {
  if (ms.family != Family::GaussianMixture)
    throw std::invalid_argument("rho sampling requires a GaussianMixture model");
  const int d = ms.d;
  int i = static_cast<int>(uniform(rng, 0.0, 1.0) * ms.n);
  if (i >= ms.n) i = ms.n - 1;
  for (int j = 0; j < d; ++j) {
    double a = theta[ms.gm_a(i) + j];
    if (a == 0.0) throw std::invalid_argument("rho: zero a component");
    x_out[j] = theta[ms.gm_b(i) + j] + normal(rng) / std::abs(a);
  }
  return 1.0 / rho_density(ms, theta, x_out);
}

void sample_domain(const DomainSampler& dom, const ModelSpec& ms, std::span<const double> theta,
                   int count, Rng& rng, std::span<double> pts, std::span<double> wts) {
  const int d = ms.d;
  if (std::holds_alternative<BoxDomain>(dom)) {
    const auto& b = std::get<BoxDomain>(dom);
    double vol = std::pow(b.hi - b.lo, d);
    for (int k = 0; k < count; ++k) {
      for (int j = 0; j < d; ++j) pts[std::size_t(k) * d + j] = uniform(rng, b.lo, b.hi);
      wts[k] = vol;
    }
  } else {
    for (int k = 0; k < count; ++k)
      wts[k] = sample_rho(ms, theta, rng, pts.subspan(std::size_t(k) * d, d));
  }
}

}  // namespace pf::rom
