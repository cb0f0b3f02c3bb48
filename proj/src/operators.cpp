// SPDX-License-Identifier: Apache-2.0
#include "paramflow/operators.hpp"

namespace pf::pde {

std::string op_name(OpKind k) {
  switch (k) {
    case OpKind::Heat: return "heat";
    case OpKind::TanhFlux: return "tanh_flux";
    case OpKind::Hjb: return "hjb";
  }
  return "?";
}

OpKind op_from_name(const std::string& s) {
  if (s == "heat") return OpKind::Heat;
  if (s == "tanh_flux") return OpKind::TanhFlux;
  if (s == "hjb") return OpKind::Hjb;
  throw std::invalid_argument("unknown operator '" + s + "'");
}

double apply_d(const OperatorSpec& op, const rom::ModelSpec& ms, std::span<const double> th,
               std::span<const double> x) {
  rom::check_sizes(ms, th.size(), x.size());
  return apply<double, double>(op, ms, th, x);
}

}  // namespace pf::pde
