// SPDX-License-Identifier: Apache-2.0
#pragma once

// Builds one reusable tape computing the augmented dynamics
//   f(gamma) = [ V_xi(theta) ; r(theta; xi) ]
// where r is the Monte-Carlo residual (1/N) sum_n w_n (grad_theta u . V - F[u])(x_n)^2.
// The directional derivative grad_theta u . V is formed by evaluating the
// model on Dual<Var> numbers whose tangents are the control-net outputs, so
// one reverse sweep over this tape yields a^T d f / d theta and
// a^T d f / d xi exactly, second-order terms included. Slots: theta, xi,
// points, weights; points and weights change per optimizer step, theta per
// solver stage.

#include <span>
#include <vector>

#include "paramflow/control.hpp"
#include "paramflow/model.hpp"
#include "paramflow/operators.hpp"
#include "paramflow/tape.hpp"

namespace pf::train {

struct FieldProgram {
  rom::ModelSpec model;
  pde::OperatorSpec op;
  ctrl::ControlNetSpec control;
  int n_mc = 0;
  bool h1_mode = false;

  ad::Tape tape;
  int slot_theta = 0, slot_xi = 0, slot_x = 0, slot_w = 0;

  int m() const { return control.m; }
  int n_params() const { return control.param_count(); }
};

FieldProgram build_field_program(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                                 const ctrl::ControlNetSpec& control, int n_mc,
                                 bool h1_mode = false);

// Per-thread evaluator over a FieldProgram's tape.
class FieldEval {
 public:
  explicit FieldEval(const FieldProgram& prog) : prog_(&prog) {
    ws_.bind(prog.tape);
    cot_.assign(prog.m() + 1, 0.0);
  }

  const FieldProgram& program() const { return *prog_; }

  void set_xi(std::span<const double> xi) { ws_.set_slot(prog_->slot_xi, xi); }
  void set_points(std::span<const double> pts, std::span<const double> wts) {
    ws_.set_slot(prog_->slot_x, pts);
    ws_.set_slot(prog_->slot_w, wts);
  }

  // dynamics: v_out = V(theta), r_out = r(theta)
  void eval(std::span<const double> theta, std::span<double> v_out, double& r_out) {
    ws_.set_slot(prog_->slot_theta, theta);
    ws_.forward();
    const auto& outs = prog_->tape.outputs();
    for (int j = 0; j < prog_->m(); ++j) v_out[j] = ws_.value(outs[j]);
    r_out = ws_.value(outs[prog_->m()]);
  }

  double running_cost(std::span<const double> theta) {
    ws_.set_slot(prog_->slot_theta, theta);
    ws_.forward();
    return ws_.value(prog_->tape.outputs()[prog_->m()]);
  }

  // Pullback with cotangent (a_theta on the V outputs, a_r on r):
  // writes (dV/dtheta)^T a_theta + a_r dr/dtheta into dtheta_out and
  // accumulates xi_scale * [(dV/dxi)^T a_theta + a_r dr/dxi] into dxi_acc.
  // reuse_forward skips re-evaluation when theta matches the last call.
  void vjp(std::span<const double> theta, std::span<const double> a_theta, double a_r,
           std::span<double> dtheta_out, std::span<double> dxi_acc, double xi_scale,
           bool reuse_forward = false) {
    if (!reuse_forward) {
      ws_.set_slot(prog_->slot_theta, theta);
      ws_.forward();
    }
    for (int j = 0; j < prog_->m(); ++j) cot_[j] = a_theta[j];
    cot_[prog_->m()] = a_r;
    ws_.backward(cot_);
    ws_.take_slot_gradient(prog_->slot_theta, dtheta_out);
    ws_.take_slot_gradient(prog_->slot_xi, dxi_acc, /*accumulate=*/true, xi_scale);
    ws_.clear_input_adjoints();
  }

 private:
  const FieldProgram* prog_;
  ad::Workspace ws_;
  std::vector<double> cot_;
};

// Tape-free reference for the running cost; an independent code path used by
// the tests to pin the tape assembly down.
double running_cost_direct(const rom::ModelSpec& model, const pde::OperatorSpec& op,
                           const ctrl::ControlParams& xi, std::span<const double> theta,
                           std::span<const double> pts, std::span<const double> wts,
                           bool h1_mode = false);

}  // namespace pf::train
