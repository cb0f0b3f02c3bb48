// SPDX-License-Identifier: Apache-2.0
#include "paramflow/tape.hpp"

#include <cmath>

namespace pf::ad {

void Workspace::forward() {
  const auto& nodes = tape_->nodes();
  const NodeId* args = tape_->args().data();
  double* val = val_.data();
  const std::size_t n = nodes.size();
  for (std::size_t i = tape_->first_compute(); i < n; ++i) {
    const Node& nd = nodes[i];
    switch (nd.op) {
      case Op::Input:
      case Op::Const:
        break;
      case Op::Add: val[i] = val[nd.a] + val[nd.b]; break;
      case Op::Sub: val[i] = val[nd.a] - val[nd.b]; break;
      case Op::Mul: val[i] = val[nd.a] * val[nd.b]; break;
      case Op::AddImm: val[i] = val[nd.a] + nd.imm; break;
      case Op::MulImm: val[i] = val[nd.a] * nd.imm; break;
      case Op::RsubImm: val[i] = nd.imm - val[nd.a]; break;
      case Op::Tanh: val[i] = std::tanh(val[nd.a]); break;
      case Op::Sigmoid: val[i] = sigmoid(val[nd.a]); break;
      case Op::Relu: val[i] = val[nd.a] > 0.0 ? val[nd.a] : 0.0; break;
      case Op::Sin: val[i] = std::sin(val[nd.a]); break;
      case Op::Cos: val[i] = std::cos(val[nd.a]); break;
      case Op::Exp: val[i] = std::exp(val[nd.a]); break;
      case Op::Recip: val[i] = 1.0 / val[nd.a]; break;
      case Op::GateGt0: val[i] = val[nd.b] > 0.0 ? val[nd.a] : 0.0; break;
      case Op::Dot: {
        const NodeId* p = args + nd.a;
        double s = 0.0;
        for (std::uint32_t k = 0; k < nd.len; ++k) s += val[p[2 * k]] * val[p[2 * k + 1]];
        val[i] = s;
        break;
      }
      case Op::DotRR: {
        const double* A = val + nd.a;
        const double* B = val + nd.b;
        double s = 0.0;
        for (std::uint32_t k = 0; k < nd.len; ++k) s += A[k] * B[k];
        val[i] = s;
        break;
      }
      case Op::Sum: {
        const NodeId* p = args + nd.a;
        double s = 0.0;
        for (std::uint32_t k = 0; k < nd.len; ++k) s += val[p[k]];
        val[i] = s;
        break;
      }
    }
  }
}

void Workspace::backward(std::span<const double> cotangent) {
  const auto& outs = tape_->outputs();
  if (cotangent.size() != outs.size())
    throw std::invalid_argument("tape: cotangent length " + std::to_string(cotangent.size()) +
                                " does not match output count " + std::to_string(outs.size()));
  const auto& nodes = tape_->nodes();
  const NodeId* args = tape_->args().data();
  double* val = val_.data();
  double* adj = adj_.data();
  for (std::size_t i = 0; i < outs.size(); ++i) adj[outs[i]] += cotangent[i];

  for (std::size_t i = nodes.size(); i-- > tape_->first_compute();) {
    const double ct = adj[i];
    adj[i] = 0.0;
    if (ct == 0.0) continue;
    const Node& nd = nodes[i];
    switch (nd.op) {
      case Op::Input:
      case Op::Const:
        break;
      case Op::Add:
        adj[nd.a] += ct;
        adj[nd.b] += ct;
        break;
      case Op::Sub:
        adj[nd.a] += ct;
        adj[nd.b] -= ct;
        break;
      case Op::Mul:
        adj[nd.a] += ct * val[nd.b];
        adj[nd.b] += ct * val[nd.a];
        break;
      case Op::AddImm: adj[nd.a] += ct; break;
      case Op::MulImm: adj[nd.a] += ct * nd.imm; break;
      case Op::RsubImm: adj[nd.a] -= ct; break;
      case Op::Tanh: adj[nd.a] += ct * (1.0 - val[i] * val[i]); break;
      case Op::Sigmoid: adj[nd.a] += ct * val[i] * (1.0 - val[i]); break;
      case Op::Relu:
        // derivative at 0 is taken as 0
        if (val[i] > 0.0) adj[nd.a] += ct;
        break;
      case Op::Sin: adj[nd.a] += ct * std::cos(val[nd.a]); break;
      case Op::Cos: adj[nd.a] -= ct * std::sin(val[nd.a]); break;
      case Op::Exp: adj[nd.a] += ct * val[i]; break;
      case Op::Recip: adj[nd.a] -= ct * val[i] * val[i]; break;
      case Op::GateGt0:
        if (val[nd.b] > 0.0) adj[nd.a] += ct;
        break;
      case Op::Dot: {
        const NodeId* p = args + nd.a;
        for (std::uint32_t k = 0; k < nd.len; ++k) {
          adj[p[2 * k]] += ct * val[p[2 * k + 1]];
          adj[p[2 * k + 1]] += ct * val[p[2 * k]];
        }
        break;
      }
      case Op::DotRR: {
        double* Aj = adj + nd.a;
        double* Bj = adj + nd.b;
        const double* A = val + nd.a;
        const double* B = val + nd.b;
        for (std::uint32_t k = 0; k < nd.len; ++k) {
          Aj[k] += ct * B[k];
          Bj[k] += ct * A[k];
        }
        break;
      }
      case Op::Sum: {
        const NodeId* p = args + nd.a;
        for (std::uint32_t k = 0; k < nd.len; ++k) adj[p[k]] += ct;
        break;
      }
    }
  }
}

std::vector<double> forward_eval(const Tape& t,
                                 std::span<const std::span<const double>> slot_values) {
  if (slot_values.size() != t.slots().size())
    throw std::invalid_argument("tape: expected values for all " +
                                std::to_string(t.slots().size()) + " slots");
  Workspace ws;
  ws.bind(t);
  for (std::size_t s = 0; s < slot_values.size(); ++s)
    ws.set_slot(static_cast<int>(s), slot_values[s]);
  ws.forward();
  std::vector<double> out(t.outputs().size());
  ws.outputs(out);
  return out;
}

GradMap vjp(const Tape& t, std::span<const std::span<const double>> slot_values,
            std::span<const double> cotangent) {
  Workspace ws;
  ws.bind(t);
  for (std::size_t s = 0; s < slot_values.size(); ++s)
    ws.set_slot(static_cast<int>(s), slot_values[s]);
  ws.forward();
  ws.backward(cotangent);
  GradMap g;
  g.by_slot.resize(t.slots().size());
  for (std::size_t s = 0; s < t.slots().size(); ++s) {
    g.by_slot[s].assign(t.slots()[s].size, 0.0);
    ws.take_slot_gradient(static_cast<int>(s), g.by_slot[s]);
  }
  return g;
}

}  // namespace pf::ad
