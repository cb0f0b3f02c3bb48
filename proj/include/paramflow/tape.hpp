// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse-mode scalar-graph engine. A Tape is built once (structure fixed
// by problem sizes), then evaluated and pulled back many times through a
// per-thread Workspace. Nodes are topologically ordered by construction and
// re-evaluation on identical inputs is bitwise deterministic.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pf::ad {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

enum class Op : std::uint8_t {
  Input,
  Const,
  Add,
  Sub,
  Mul,
  AddImm,   // val[a] + imm
  MulImm,   // val[a] * imm
  RsubImm,  // imm - val[a]
  Tanh,
  Sigmoid,
  Relu,
  Sin,
  Cos,
  Exp,
  Recip,
  GateGt0,  // val[b] > 0 ? val[a] : 0   (tangent of relu)
  Dot,      // sum_k val[args[a+2k]] * val[args[a+2k+1]], len pairs
  DotRR,    // sum_k val[a+k] * val[b+k] over contiguous ranges, len entries
  Sum,      // sum_k val[args[a+k]], len entries
};

struct Node {
  Op op;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  std::uint32_t len = 0;
  double imm = 0.0;
};

struct InputSlot {
  std::string name;
  NodeId first = 0;
  std::uint32_t size = 0;
};

class Tape {
 public:
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<NodeId>& args() const { return args_; }
  const std::vector<InputSlot>& slots() const { return slots_; }
  const std::vector<NodeId>& outputs() const { return outputs_; }
  NodeId first_compute() const { return first_compute_; }
  std::uint32_t num_inputs() const { return first_compute_; }

  int slot_index(std::string_view name) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].name == name) return static_cast<int>(i);
    throw std::out_of_range("tape: unknown input slot '" + std::string(name) + "'");
  }

 private:
  friend class TapeBuilder;
  std::vector<Node> nodes_;
  std::vector<NodeId> args_;
  std::vector<InputSlot> slots_;
  std::vector<NodeId> outputs_;
  NodeId first_compute_ = 0;
};

class TapeBuilder;

// Handle to a tape value during construction. Cheap to copy; arithmetic on
// Vars appends nodes to the owning builder.
struct Var {
  TapeBuilder* tb = nullptr;
  NodeId id = kNoNode;
};

class TapeBuilder {
 public:
  // All slots must be declared before the first compute node.
  int input_slot(std::string_view name, std::uint32_t size) {
    if (compute_started_) throw std::logic_error("tape: input slots must precede compute nodes");
    InputSlot s{std::string(name), static_cast<NodeId>(t_.nodes_.size()), size};
    for (std::uint32_t i = 0; i < size; ++i) t_.nodes_.push_back({Op::Input});
    t_.slots_.push_back(std::move(s));
    t_.first_compute_ = static_cast<NodeId>(t_.nodes_.size());
    return static_cast<int>(t_.slots_.size()) - 1;
  }

  Var slot_var(int slot, std::uint32_t i) {
    const auto& s = t_.slots_.at(slot);
    assert(i < s.size);
    return Var{this, s.first + i};
  }

  std::vector<Var> slot_vars(int slot) {
    const auto& s = t_.slots_.at(slot);
    std::vector<Var> v(s.size);
    for (std::uint32_t i = 0; i < s.size; ++i) v[i] = Var{this, s.first + i};
    return v;
  }

  Var constant(double c) { return emit({Op::Const, kNoNode, kNoNode, 0, c}); }

  Var unary(Op op, Var a) { return emit({op, a.id, kNoNode, 0, 0.0}); }
  Var unary_imm(Op op, Var a, double imm) { return emit({op, a.id, kNoNode, 0, imm}); }
  Var binary(Op op, Var a, Var b) { return emit({op, a.id, b.id, 0, 0.0}); }

  // gate > 0 selects val, else 0
  Var gate_gt0(Var val, Var gate) { return emit({Op::GateGt0, val.id, gate.id, 0, 0.0}); }

  Var dot_pairs(std::span<const Var> a, std::span<const Var> b) {
    assert(a.size() == b.size() && !a.empty());
    auto ofs = static_cast<NodeId>(t_.args_.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      t_.args_.push_back(a[k].id);
      t_.args_.push_back(b[k].id);
    }
    return emit({Op::Dot, ofs, kNoNode, static_cast<std::uint32_t>(a.size()), 0.0});
  }

  Var dot_ranges(NodeId a0, NodeId b0, std::uint32_t len) {
    return emit({Op::DotRR, a0, b0, len, 0.0});
  }

  Var sum(std::span<const Var> xs) {
    assert(!xs.empty());
    if (xs.size() == 1) return xs[0];
    auto ofs = static_cast<NodeId>(t_.args_.size());
    for (auto v : xs) t_.args_.push_back(v.id);
    return emit({Op::Sum, ofs, kNoNode, static_cast<std::uint32_t>(xs.size()), 0.0});
  }

  void mark_output(Var v) { t_.outputs_.push_back(v.id); }

  std::size_t size() const { return t_.nodes_.size(); }

  Tape build() {
    compute_started_ = false;
    return std::move(t_);
  }

 private:
  Var emit(Node n) {
    compute_started_ = true;
    t_.nodes_.push_back(n);
    return Var{this, static_cast<NodeId>(t_.nodes_.size() - 1)};
  }

  Tape t_;
  bool compute_started_ = false;
};

// ---- Var arithmetic ----

inline Var operator+(Var a, Var b) { return a.tb->binary(Op::Add, a, b); }
inline Var operator-(Var a, Var b) { return a.tb->binary(Op::Sub, a, b); }
inline Var operator*(Var a, Var b) { return a.tb->binary(Op::Mul, a, b); }
inline Var operator+(Var a, double c) { return a.tb->unary_imm(Op::AddImm, a, c); }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return a.tb->unary_imm(Op::RsubImm, a, c); }
inline Var operator*(Var a, double c) { return a.tb->unary_imm(Op::MulImm, a, c); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator-(Var a) { return a * -1.0; }

inline Var tanh(Var a) { return a.tb->unary(Op::Tanh, a); }
inline Var sigmoid(Var a) { return a.tb->unary(Op::Sigmoid, a); }
inline Var relu(Var a) { return a.tb->unary(Op::Relu, a); }
inline Var sin(Var a) { return a.tb->unary(Op::Sin, a); }
inline Var cos(Var a) { return a.tb->unary(Op::Cos, a); }
inline Var exp(Var a) { return a.tb->unary(Op::Exp, a); }
inline Var recip(Var a) { return a.tb->unary(Op::Recip, a); }
inline Var gate_positive(Var gate, Var val) { return val.tb->gate_gt0(val, gate); }

// double overloads so scalar-generic code instantiates at S = double
inline double tanh(double x) { return std::tanh(x); }
inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double exp(double x) { return std::exp(x); }
inline double recip(double x) { return 1.0 / x; }
inline double gate_positive(double gate, double val) { return gate > 0.0 ? val : 0.0; }

// Groups the per-slot gradients produced by a pullback.
struct GradMap {
  std::vector<std::vector<double>> by_slot;
  std::span<const double> slot(int i) const { return by_slot.at(i); }
};

// Per-thread evaluation state. bind() once per tape; set_slot/forward/
// backward in a cycle. The adjoint array is kept all-zero between pullbacks
// (backward consumes entries as it walks), so no per-call clearing is needed.
class Workspace {
 public:
  void bind(const Tape& t) {
    tape_ = &t;
    val_.assign(t.nodes().size(), 0.0);
    adj_.assign(t.nodes().size(), 0.0);
    for (NodeId i = t.first_compute(); i < t.nodes().size(); ++i)
      if (t.nodes()[i].op == Op::Const) val_[i] = t.nodes()[i].imm;
  }

  const Tape& tape() const { return *tape_; }

  void set_slot(int slot, std::span<const double> x) {
    const auto& s = tape_->slots().at(slot);
    if (x.size() != s.size)
      throw std::invalid_argument("tape: slot '" + s.name + "' expects " +
                                  std::to_string(s.size) + " values, got " +
                                  std::to_string(x.size()));
    for (std::uint32_t i = 0; i < s.size; ++i) val_[s.first + i] = x[i];
  }

  void forward();

  double value(NodeId id) const { return val_[id]; }
  double output(std::size_t i) const { return val_[tape_->outputs().at(i)]; }
  void outputs(std::span<double> out) const {
    for (std::size_t i = 0; i < tape_->outputs().size(); ++i) out[i] = val_[tape_->outputs()[i]];
  }

  // Pullback of cotangent^T * (outputs). Requires a preceding forward() on
  // the same inputs. Input-node adjoints stay in place until taken.
  void backward(std::span<const double> cotangent);

  // Copies the adjoint of a slot and clears it (accumulate=true adds).
  void take_slot_gradient(int slot, std::span<double> out, bool accumulate = false,
                          double scale = 1.0) {
    const auto& s = tape_->slots().at(slot);
    for (std::uint32_t i = 0; i < s.size; ++i) {
      double g = adj_[s.first + i] * scale;
      adj_[s.first + i] = 0.0;
      if (accumulate)
        out[i] += g;
      else
        out[i] = g;
    }
  }

  // Clears any remaining input adjoints (call after taking the slots you need).
  void clear_input_adjoints() {
    for (NodeId i = 0; i < tape_->num_inputs(); ++i) adj_[i] = 0.0;
  }

 private:
  const Tape* tape_ = nullptr;
  std::vector<double> val_;
  std::vector<double> adj_;
};

// ---- convenience wrappers used by tests and small callers ----

// One-shot forward: binds a fresh workspace, sets every slot, returns outputs.
std::vector<double> forward_eval(const Tape& t,
                                 std::span<const std::span<const double>> slot_values);

// One-shot pullback: forward + backward, returning one gradient per slot.
GradMap vjp(const Tape& t, std::span<const std::span<const double>> slot_values,
            std::span<const double> cotangent);

}  // namespace pf::ad
