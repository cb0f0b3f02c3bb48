// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "paramflow/dual.hpp"
#include "paramflow/tape.hpp"
#include "paramflow/util.hpp"

using namespace pf;
using namespace pf::ad;

namespace {

// Central finite differences of a scalar function of a flat input vector;
// the independent oracle for every pullback test in this file.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + h;
    double fp = f(x);
    x[i] = keep - h;
    double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

double rel_err(double got, double want, double floor = 1e-12) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

// A tiny random straight-line program interpretable at any scalar type; used
// for the jvp-vs-vjp consistency property and determinism checks.
struct Program {
  enum class I { Add, Sub, Mul, Tanh, Sigmoid, Sin, Cos, MulImm, AddImm };
  struct Ins {
    I op;
    int a, b;
    double imm;
  };
  int n_inputs;
  std::vector<Ins> ins;

  static Program random(int n_inputs, int length, Rng& rng) {
    Program p;
    p.n_inputs = n_inputs;
    for (int k = 0; k < length; ++k) {
      int pool = n_inputs + k;
      Ins is{};
      int pick = static_cast<int>(uniform(rng, 0, 9));
      is.op = static_cast<I>(std::min(pick, 8));
      is.a = static_cast<int>(uniform(rng, 0, pool));
      is.b = static_cast<int>(uniform(rng, 0, pool));
      is.imm = uniform(rng, -1.2, 1.2);
      p.ins.push_back(is);
    }
    return p;
  }

  template <class S>
  S run(std::span<const S> inputs) const {
    using pf::ad::cos;
    using pf::ad::sigmoid;
    using pf::ad::sin;
    using pf::ad::tanh;
    std::vector<S> pool(inputs.begin(), inputs.end());
    for (const auto& is : ins) {
      S a = pool[is.a], b = pool[is.b];
      switch (is.op) {
        case I::Add: pool.push_back(a + b); break;
        case I::Sub: pool.push_back(a - b); break;
        case I::Mul: pool.push_back(a * b); break;
        case I::Tanh: pool.push_back(tanh(a)); break;
        case I::Sigmoid: pool.push_back(sigmoid(a)); break;
        case I::Sin: pool.push_back(sin(a)); break;
        case I::Cos: pool.push_back(cos(a)); break;
        case I::MulImm: pool.push_back(a * is.imm); break;
        case I::AddImm: pool.push_back(a + is.imm); break;
      }
    }
    // contract to a scalar so the output stays bounded
    S out = tanh(pool.back());
    for (int i = 0; i < n_inputs; ++i) out = out + tanh(pool[pool.size() - 2 - i] * 0.5);
    return out;
  }

  Tape to_tape() const {
    TapeBuilder tb;
    int slot = tb.input_slot("x", n_inputs);
    std::vector<Var> in = tb.slot_vars(slot);
    Var out = run<Var>(in);
    tb.mark_output(out);
    return tb.build();
  }
};

}  // namespace

TEST_SUITE("tape") {
  TEST_CASE("forward: product, tanh at origin") {
    TapeBuilder tb;
    int s = tb.input_slot("xy", 2);
    Var prod = tb.slot_var(s, 0) * tb.slot_var(s, 1);
    tb.mark_output(prod);
    tb.mark_output(tanh(tb.constant(0.0)));
    Tape t = tb.build();
    std::vector<double> in{2.0, 3.0};
    std::span<const double> sp(in);
    auto out = forward_eval(t, std::array{sp});
    CHECK(out[0] == doctest::Approx(6.0));
    CHECK(out[1] == 0.0);
  }

  TEST_CASE("forward: 2-layer relu net with zero weights returns last bias") {
    // y = W2 relu(W1 x + b1) + b2 with W1 = W2 = 0
    const int n = 3;
    TapeBuilder tb;
    int xs = tb.input_slot("x", n);
    std::vector<Var> h;
    for (int j = 0; j < n; ++j) h.push_back(relu(tb.slot_var(xs, j) * 0.0 + 0.5));
    Var y = tb.constant(0.0);
    for (int j = 0; j < n; ++j) y = y + h[j] * 0.0;
    const double b2 = -1.75;
    y = y + b2;
    tb.mark_output(y);
    Tape t = tb.build();
    std::vector<double> in{0.3, -2.0, 11.0};
    std::span<const double> sp(in);
    CHECK(forward_eval(t, std::array{sp})[0] == doctest::Approx(b2));
  }

  TEST_CASE("forward: unbound slot and size mismatch are configuration errors") {
    TapeBuilder tb;
    int s = tb.input_slot("x", 2);
    tb.mark_output(tb.slot_var(s, 0) + tb.slot_var(s, 1));
    Tape t = tb.build();
    std::vector<double> bad{1.0};
    std::span<const double> sp(bad);
    CHECK_THROWS_AS((void)forward_eval(t, std::array{sp}), std::invalid_argument);
    CHECK_THROWS_AS((void)forward_eval(t, std::span<const std::span<const double>>{}),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)t.slot_index("nope"), std::out_of_range);
  }

  TEST_CASE("vjp: x^2 at 3 gives 6; zero cotangent gives zero gradients") {
    TapeBuilder tb;
    int s = tb.input_slot("x", 1);
    Var x = tb.slot_var(s, 0);
    tb.mark_output(x * x);
    Tape t = tb.build();
    std::vector<double> in{3.0};
    std::span<const double> sp(in);
    std::vector<double> ct{1.0};
    auto g = vjp(t, std::array{sp}, ct);
    CHECK(g.slot(0)[0] == doctest::Approx(6.0));
    ct[0] = 0.0;
    auto gz = vjp(t, std::array{sp}, ct);
    CHECK(gz.slot(0)[0] == 0.0);
  }

  TEST_CASE("vjp: cotangent size mismatch rejected") {
    TapeBuilder tb;
    int s = tb.input_slot("x", 1);
    tb.mark_output(tb.slot_var(s, 0));
    Tape t = tb.build();
    std::vector<double> in{1.0};
    std::span<const double> sp(in);
    std::vector<double> ct{1.0, 2.0};
    CHECK_THROWS_AS((void)vjp(t, std::array{sp}, ct), std::invalid_argument);
  }

  TEST_CASE("vjp matches finite differences on random 3-input programs") {
    Rng rng = make_rng(42);
    for (int rep = 0; rep < 20; ++rep) {
      Program p = Program::random(3, 12, rng);
      Tape t = p.to_tape();
      std::vector<double> x{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
      std::span<const double> sp(x);
      std::vector<double> ct{1.0};
      auto g = vjp(t, std::array{sp}, ct);
      auto fd = fd_gradient([&](std::span<const double> q) { return p.run<double>(q); }, x);
      // floor guards against FD roundoff when a component is near zero
      for (int i = 0; i < 3; ++i) CHECK(rel_err(g.slot(0)[i], fd[i], 1e-3) < 1e-6);
    }
  }

  TEST_CASE("every elementary op matches finite differences at 10 random points") {
    Rng rng = make_rng(7);
    struct OpCase {
      const char* name;
      std::function<Var(TapeBuilder&, std::span<const Var>)> build;
      std::function<double(std::span<const double>)> ref;
      int arity;
      double lo, hi;
    };
    std::vector<OpCase> cases = {
        {"add", [](TapeBuilder&, std::span<const Var> v) { return v[0] + v[1]; },
         [](std::span<const double> x) { return x[0] + x[1]; }, 2, -2, 2},
        {"sub", [](TapeBuilder&, std::span<const Var> v) { return v[0] - v[1]; },
         [](std::span<const double> x) { return x[0] - x[1]; }, 2, -2, 2},
        {"mul", [](TapeBuilder&, std::span<const Var> v) { return v[0] * v[1]; },
         [](std::span<const double> x) { return x[0] * x[1]; }, 2, -2, 2},
        {"tanh", [](TapeBuilder&, std::span<const Var> v) { return tanh(v[0]); },
         [](std::span<const double> x) { return std::tanh(x[0]); }, 1, -2, 2},
        {"sigmoid", [](TapeBuilder&, std::span<const Var> v) { return sigmoid(v[0]); },
         [](std::span<const double> x) { return 1 / (1 + std::exp(-x[0])); }, 1, -2, 2},
        {"relu", [](TapeBuilder&, std::span<const Var> v) { return relu(v[0]); },
         [](std::span<const double> x) { return x[0] > 0 ? x[0] : 0.0; }, 1, 0.2, 2},
        {"sin", [](TapeBuilder&, std::span<const Var> v) { return sin(v[0]); },
         [](std::span<const double> x) { return std::sin(x[0]); }, 1, -2, 2},
        {"cos", [](TapeBuilder&, std::span<const Var> v) { return cos(v[0]); },
         [](std::span<const double> x) { return std::cos(x[0]); }, 1, -2, 2},
        {"exp", [](TapeBuilder&, std::span<const Var> v) { return exp(v[0]); },
         [](std::span<const double> x) { return std::exp(x[0]); }, 1, -1, 1},
        {"recip", [](TapeBuilder&, std::span<const Var> v) { return recip(v[0]); },
         [](std::span<const double> x) { return 1.0 / x[0]; }, 1, 0.5, 2},
        {"dot",
         [](TapeBuilder& tb, std::span<const Var> v) {
           return tb.dot_pairs(v.subspan(0, 2), v.subspan(2, 2));
         },
         [](std::span<const double> x) { return x[0] * x[2] + x[1] * x[3]; }, 4, -2, 2},
    };
    for (const auto& c : cases) {
      CAPTURE(c.name);
      for (int rep = 0; rep < 10; ++rep) {
        TapeBuilder tb;
        int s = tb.input_slot("x", c.arity);
        auto vars = tb.slot_vars(s);
        tb.mark_output(c.build(tb, vars));
        Tape t = tb.build();
        std::vector<double> x(c.arity);
        for (auto& v : x) v = uniform(rng, c.lo, c.hi);
        std::span<const double> sp(x);
        std::vector<double> ct{1.0};
        auto g = vjp(t, std::array{sp}, ct);
        auto fd = fd_gradient(c.ref, x);
        for (int i = 0; i < c.arity; ++i)
          CHECK(rel_err(g.slot(0)[i], fd[i], 1e-3) < 1e-6);
      }
    }
  }

  TEST_CASE("DotRR fused range dot agrees with explicit products") {
    Rng rng = make_rng(3);
    TapeBuilder tb;
    int s = tb.input_slot("x", 8);
    auto v = tb.slot_vars(s);
    Var fused = tb.dot_ranges(v[0].id, v[4].id, 4);
    Var manual = v[0] * v[4] + v[1] * v[5] + v[2] * v[6] + v[3] * v[7];
    tb.mark_output(fused - manual);
    Tape t = tb.build();
    std::vector<double> x(8);
    for (auto& e : x) e = uniform(rng, -3, 3);
    std::span<const double> sp(x);
    CHECK(std::abs(forward_eval(t, std::array{sp})[0]) < 1e-14);
    std::vector<double> ct{1.0};
    auto g = vjp(t, std::array{sp}, ct);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(g.slot(0)[i]) < 1e-14);
  }

  TEST_CASE("evaluation is bitwise deterministic") {
    Rng rng = make_rng(11);
    Program p = Program::random(4, 30, rng);
    Tape t = p.to_tape();
    std::vector<double> x{0.3, -0.7, 1.9, 0.01};
    std::span<const double> sp(x);
    auto a = forward_eval(t, std::array{sp});
    auto b = forward_eval(t, std::array{sp});
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    // repeated use of one workspace must also be bit-stable
    Workspace ws;
    ws.bind(t);
    ws.set_slot(0, sp);
    ws.forward();
    double v1 = ws.output(0);
    ws.forward();
    CHECK(std::memcmp(&v1, &(const double&)ws.output(0), sizeof(double)) == 0);
  }

  TEST_CASE("workspace pullbacks are reusable without cross-talk") {
    // two consecutive vjps through one workspace give identical gradients
    Rng rng = make_rng(5);
    Program p = Program::random(3, 15, rng);
    Tape t = p.to_tape();
    Workspace ws;
    ws.bind(t);
    std::vector<double> x{0.5, -0.25, 0.75};
    ws.set_slot(0, x);
    ws.forward();
    std::vector<double> ct{1.0}, g1(3), g2(3);
    ws.backward(ct);
    ws.take_slot_gradient(0, g1);
    ws.forward();
    ws.backward(ct);
    ws.take_slot_gradient(0, g2);
    for (int i = 0; i < 3; ++i) CHECK(g1[i] == g2[i]);
  }
}

TEST_SUITE("dual") {
  TEST_CASE("jvp: half squared norm") {
    auto f = [](std::span<const DualScalar> v) {
      DualScalar s = v[0] * v[0] + v[1] * v[1];
      return s * 0.5;
    };
    std::vector<double> primal{1.0, 2.0}, tangent{1.0, 0.0};
    auto [val, dir] = jvp(f, primal, tangent);
    CHECK(val == doctest::Approx(2.5));
    CHECK(dir == doctest::Approx(1.0));
    std::vector<double> zt{0.0, 0.0};
    CHECK(jvp(f, primal, zt).second == 0.0);
  }

  TEST_CASE("jvp equals <vjp gradient, tangent> on 100 random programs") {
    Rng rng = make_rng(1234);
    for (int rep = 0; rep < 100; ++rep) {
      int n = 2 + static_cast<int>(uniform(rng, 0, 3));
      Program p = Program::random(n, 10, rng);
      Tape t = p.to_tape();
      std::vector<double> x(n), v(n);
      for (auto& e : x) e = uniform(rng, -1, 1);
      for (auto& e : v) e = uniform(rng, -1, 1);
      std::span<const double> sp(x);
      std::vector<double> ct{1.0};
      auto g = vjp(t, std::array{sp}, ct);
      double lhs = jvp([&](std::span<const DualScalar> q) { return p.run<DualScalar>(q); }, x, v)
                       .second;
      double rhs = dot(g.slot(0), v);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }

  TEST_CASE("dual product rule is exact") {
    DualScalar x{3.0, 2.0}, y{-1.5, 0.25};
    auto z = x * y;
    CHECK(z.v == 3.0 * -1.5);
    CHECK(z.d == 3.0 * 0.25 + -1.5 * 2.0);
  }

  TEST_CASE("relu tangent gates on the primal sign, 0 at the origin") {
    DualScalar a{0.5, 3.0}, b{-0.5, 3.0}, c{0.0, 3.0};
    CHECK(relu(a).d == 3.0);
    CHECK(relu(b).d == 0.0);
    CHECK(relu(c).d == 0.0);
  }
}
