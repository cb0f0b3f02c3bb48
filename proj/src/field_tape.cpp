// SPDX-License-Identifier: Apache-2.0
#include "paramflow/field_tape.hpp"

#include "paramflow/dual.hpp"

namespace pf::train {

FieldProgram build_field_program(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                                 const ctrl::ControlNetSpec& control, int n_mc, bool h1_mode) {
  if (n_mc < 1) throw std::invalid_argument("field program: empty Monte-Carlo batch");
  if (control.m != model.param_count())
    throw std::invalid_argument("field program: control dimension does not match model");
  op.validate();
  control.validate();

  FieldProgram fp;
  fp.model = model;
  fp.op = op;
  fp.control = control;
  fp.n_mc = n_mc;
  fp.h1_mode = h1_mode;

  const int m = control.m, d = model.d;
  using ad::Var;
  ad::TapeBuilder tb;
  fp.slot_theta = tb.input_slot("theta", m);
  fp.slot_xi = tb.input_slot("xi", control.param_count());
  fp.slot_x = tb.input_slot("points", std::uint32_t(n_mc) * d);
  fp.slot_w = tb.input_slot("weights", n_mc);

  std::vector<Var> theta = tb.slot_vars(fp.slot_theta);
  std::vector<Var> xi = tb.slot_vars(fp.slot_xi);
  std::vector<Var> xs = tb.slot_vars(fp.slot_x);
  std::vector<Var> ws = tb.slot_vars(fp.slot_w);

  std::vector<Var> v = ctrl::eval_field<Var>(control, xi, theta);
  for (int j = 0; j < m; ++j) tb.mark_output(v[j]);

  // theta as duals with tangent V: the tangent output of u is grad_theta u . V
  std::vector<ad::Dual<Var>> th_dual(m);
  for (int j = 0; j < m; ++j) th_dual[j] = {theta[j], v[j]};

  std::vector<Var> terms;
  terms.reserve(n_mc);
  std::vector<ad::Dual<Var>> du(d, th_dual[0]);
  std::vector<Var> dF(d, theta[0]);
  for (int k = 0; k < n_mc; ++k) {
    std::span<const Var> xk(xs.data() + std::size_t(k) * d, d);
    ad::Dual<Var> u = rom::eval<ad::Dual<Var>, Var>(model, th_dual, xk);
    Var F = pde::apply<Var, Var>(op, model, theta, xk);
    Var rho = u.d - F;
    Var sq = rho * rho;
    if (h1_mode) {
      rom::grad_x<ad::Dual<Var>, Var>(model, th_dual, xk, du);
      pde::apply_grad_x<Var, Var>(op, model, theta, xk, dF);
      for (int j = 0; j < d; ++j) {
        Var rj = du[j].d - dF[j];
        sq = sq + rj * rj;
      }
    }
    terms.push_back(sq * ws[k]);
  }
  Var r = tb.sum(terms) * (1.0 / n_mc);
  tb.mark_output(r);
  fp.tape = tb.build();
  return fp;
}

double running_cost_direct(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                           const ctrl::ControlParams& xi, std::span<const double> theta,
                           std::span<const double> pts, std::span<const double> wts,
                           bool h1_mode) {
  if (wts.empty()) throw std::invalid_argument("running cost: empty batch");
  const int d = model.d, m = model.param_count();
  std::vector<double> v = ctrl::eval_field_d(xi, theta);
  std::vector<ad::Dual<double>> th_dual(m);
  for (int j = 0; j < m; ++j) th_dual[j] = {theta[j], v[j]};
  double acc = 0.0;
  std::vector<ad::Dual<double>> du(d);
  std::vector<double> dF(d);
  for (std::size_t k = 0; k < wts.size(); ++k) {
    auto xk = pts.subspan(k * d, d);
    auto u = rom::eval<ad::Dual<double>, double>(model, th_dual, xk);
    double F = pde::apply<double, double>(op, model, theta, xk);
    double rho = u.d - F;
    double sq = rho * rho;
    if (h1_mode) {
      rom::grad_x<ad::Dual<double>, double>(model, th_dual, xk, du);
      pde::apply_grad_x<double, double>(op, model, theta, xk, dF);
      for (int j = 0; j < d; ++j) sq += (du[j].d - dF[j]) * (du[j].d - dF[j]);
    }
    acc += sq * wts[k];
  }
  return acc / double(wts.size());
}

}  // namespace pf::train
