// SPDX-License-Identifier: Apache-2.0
#include "paramflow/model.hpp"

namespace pf::rom {

std::string family_name(Family f) {
  switch (f) {
    case Family::SineModes: return "sine_modes";
    case Family::PeriodicSineTanh: return "periodic_sine_tanh";
    case Family::GaussianMixture: return "gaussian_mixture";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "sine_modes") return Family::SineModes;
  if (s == "periodic_sine_tanh") return Family::PeriodicSineTanh;
  if (s == "gaussian_mixture") return Family::GaussianMixture;
  throw std::invalid_argument("unknown model family '" + s + "'");
}

ModelSpec ModelSpec::sine_modes(int d, std::vector<int> modes_flat) {
  if (modes_flat.empty() || modes_flat.size() % d != 0)
    throw std::invalid_argument("sine_modes: modes must be n*d integers");
  ModelSpec ms;
  ms.family = Family::SineModes;
  ms.d = d;
  ms.n = static_cast<int>(modes_flat.size()) / d;
  ms.modes = std::move(modes_flat);
  return ms;
}

ModelSpec ModelSpec::periodic_sine_tanh(int d, int n) {
  if (d < 1 || n < 1) throw std::invalid_argument("periodic_sine_tanh: d, n must be >= 1");
  ModelSpec ms;
  ms.family = Family::PeriodicSineTanh;
  ms.d = d;
  ms.n = n;
  return ms;
}

ModelSpec ModelSpec::gaussian_mixture(int d, int n) {
  if (d < 1 || n < 1) throw std::invalid_argument("gaussian_mixture: d, n must be >= 1");
  ModelSpec ms;
  ms.family = Family::GaussianMixture;
  ms.d = d;
  ms.n = n;
  return ms;
}

double eval_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x) {
  check_sizes(ms, th.size(), x.size());
  return eval<double, double>(ms, th, x);
}

void grad_x_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x,
              std::span<double> out) {
  check_sizes(ms, th.size(), x.size());
  grad_x<double, double>(ms, th, x, out);
}

double laplacian_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x) {
  check_sizes(ms, th.size(), x.size());
  return laplacian<double, double>(ms, th, x);
}

void grad_theta_d(const ModelSpec& ms, std::span<const double> th, std::span<const double> x,
                  std::span<double> out) {
  check_sizes(ms, th.size(), x.size());
  grad_theta<double, double>(ms, th, x, out);
}

}  // namespace pf::rom
