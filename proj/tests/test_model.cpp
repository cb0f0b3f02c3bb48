// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "paramflow/model.hpp"
#include "paramflow/operators.hpp"
#include "paramflow/sampler.hpp"

using namespace pf;
using namespace pf::rom;

namespace {

double fd_partial(const std::function<double(std::span<const double>)>& f,
                  std::vector<double> x, std::size_t i, double h = 1e-5) {
  double keep = x[i];
  x[i] = keep + h;
  double fp = f(x);
  x[i] = keep - h;
  double fm = f(x);
  return (fp - fm) / (2 * h);
}

double relerr(double got, double want, double floor = 1e-4) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

ParamVector random_theta(const ModelSpec& ms, Rng& rng, double scale = 0.7) {
  ParamVector th(ms);
  for (auto& v : th.values) v = normal(rng, 0.0, scale);
  if (ms.family == Family::GaussianMixture)
    for (int i = 0; i < ms.n; ++i)
      for (int j = 0; j < ms.d; ++j)
        th.values[ms.gm_a(i) + j] += th.values[ms.gm_a(i) + j] >= 0 ? 0.4 : -0.4;  // keep |a| off 0
  return th;
}

std::vector<ModelSpec> specs_under_test() {
  return {ModelSpec::sine_modes(2, {1, 0, 0, 1, 1, 1}), ModelSpec::periodic_sine_tanh(2, 3),
          ModelSpec::periodic_sine_tanh(3, 2), ModelSpec::gaussian_mixture(2, 3),
          ModelSpec::gaussian_mixture(3, 2)};
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("layout counts") {
    CHECK(ModelSpec::periodic_sine_tanh(10, 80).param_count() == 970);
    CHECK(ModelSpec::gaussian_mixture(8, 50).param_count() == 850);
    CHECK(ModelSpec::sine_modes(2, {1, 0, 0, 1}).param_count() == 2);
  }

  TEST_CASE("PeriodicSineTanh hand values") {
    // all c = 0 -> identically zero
    auto ms = ModelSpec::periodic_sine_tanh(2, 3);
    ParamVector th(ms);
    Rng rng = make_rng(1);
    for (int j = 0; j < ms.d; ++j) th.values[ms.pst_beta() + j] = normal(rng);
    for (int i = 0; i < ms.n; ++i) {
      for (int j = 0; j < ms.d; ++j) th.values[ms.pst_a(i) + j] = normal(rng);
      th.values[ms.pst_b(i)] = normal(rng);
    }
    std::vector<double> x{0.3, -0.8};
    CHECK(eval_d(ms, th.values, x) == 0.0);
    CHECK(laplacian_d(ms, th.values, x) == 0.0);

    // n=1, d=1: u(0.5) = tanh(sin(pi/2)) = tanh(1)
    auto m1 = ModelSpec::periodic_sine_tanh(1, 1);
    ParamVector t1(m1);
    t1.values[m1.pst_a(0)] = 1.0;
    t1.values[m1.pst_c(0)] = 1.0;
    std::vector<double> xh{0.5};
    CHECK(eval_d(m1, t1.values, xh) == doctest::Approx(std::tanh(1.0)).epsilon(1e-12));
  }

  TEST_CASE("GaussianMixture hand values") {
    auto ms = ModelSpec::gaussian_mixture(3, 1);
    ParamVector th(ms);
    th.values[ms.gm_w(0)] = 1.0;
    for (int j = 0; j < 3; ++j) th.values[ms.gm_a(0) + j] = 1.0;
    std::vector<double> x{0.0, 0.0, 0.0};
    CHECK(eval_d(ms, th.values, x) == doctest::Approx(1.0));

    // single term at x = b: gradient 0, laplacian = -w sum a_j^2
    ParamVector t2(ms);
    t2.values[ms.gm_w(0)] = 0.7;
    double a2sum = 0.0;
    for (int j = 0; j < 3; ++j) {
      t2.values[ms.gm_a(0) + j] = 0.5 + 0.3 * j;
      t2.values[ms.gm_b(0) + j] = 0.2 * j - 0.1;
      a2sum += t2.values[ms.gm_a(0) + j] * t2.values[ms.gm_a(0) + j];
    }
    std::vector<double> xb{-0.1, 0.1, 0.3};
    std::vector<double> g(3);
    grad_x_d(ms, t2.values, xb, g);
    for (double v : g) CHECK(std::abs(v) < 1e-14);
    CHECK(laplacian_d(ms, t2.values, xb) == doctest::Approx(-0.7 * a2sum).epsilon(1e-12));
  }

  TEST_CASE("periodicity: u(x) == u(x + 2 e_j)") {
    Rng rng = make_rng(77);
    auto ms = ModelSpec::periodic_sine_tanh(3, 4);
    for (int rep = 0; rep < 10; ++rep) {
      auto th = random_theta(ms, rng);
      std::vector<double> x{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
      double u0 = eval_d(ms, th.values, x);
      for (int j = 0; j < 3; ++j) {
        auto xs = x;
        xs[j] += 2.0;
        CHECK(std::abs(eval_d(ms, th.values, xs) - u0) < 1e-12);
      }
    }
  }

  TEST_CASE("GaussianMixture decays far from the bumps") {
    Rng rng = make_rng(5);
    auto ms = ModelSpec::gaussian_mixture(2, 4);
    HjbBoxSampler box;
    auto th = sample_initial(InitSampler{box}, ms, rng);
    std::vector<double> far{50.0, -50.0};
    CHECK(std::abs(eval_d(ms, th.values, far)) < 1e-8);
  }

  TEST_CASE("grad_x and laplacian match finite differences") {
    Rng rng = make_rng(9);
    for (const auto& ms : specs_under_test()) {
      CAPTURE(family_name(ms.family));
      for (int rep = 0; rep < 4; ++rep) {
        auto th = random_theta(ms, rng);
        std::vector<double> x(ms.d);
        for (auto& v : x) v = uniform(rng, -0.9, 0.9);
        auto f = [&](std::span<const double> q) { return eval_d(ms, th.values, q); };

        std::vector<double> g(ms.d);
        grad_x_d(ms, th.values, x, g);
        for (int j = 0; j < ms.d; ++j) CHECK(relerr(g[j], fd_partial(f, x, j)) < 1e-6);

        // laplacian equals the trace of an FD Hessian
        double lap_fd = 0.0;
        const double h = 1e-4;
        double f0 = f(x);
        for (int j = 0; j < ms.d; ++j) {
          auto xp = x, xm = x;
          xp[j] += h;
          xm[j] -= h;
          lap_fd += (f(xp) - 2 * f0 + f(xm)) / (h * h);
        }
        CHECK(relerr(laplacian_d(ms, th.values, x), lap_fd, 1e-2) < 1e-4);
      }
    }
  }

  TEST_CASE("hess_x and grad_x_laplacian match finite differences of grad_x") {
    Rng rng = make_rng(19);
    for (const auto& ms : specs_under_test()) {
      CAPTURE(family_name(ms.family));
      auto th = random_theta(ms, rng);
      std::vector<double> x(ms.d);
      for (auto& v : x) v = uniform(rng, -0.9, 0.9);

      std::vector<double> H(std::size_t(ms.d) * ms.d);
      hess_x<double, double>(ms, th.values, x, H);
      for (int j = 0; j < ms.d; ++j)
        for (int k = 0; k < ms.d; ++k) {
          auto dj = [&](std::span<const double> q) {
            std::vector<double> gg(ms.d);
            grad_x_d(ms, th.values, q, gg);
            return gg[j];
          };
          CHECK(relerr(H[std::size_t(j) * ms.d + k], fd_partial(dj, x, k), 1e-3) < 1e-5);
        }

      std::vector<double> gl(ms.d);
      grad_x_laplacian<double, double>(ms, th.values, x, gl);
      for (int l = 0; l < ms.d; ++l) {
        auto lap = [&](std::span<const double> q) { return laplacian_d(ms, th.values, q); };
        CHECK(relerr(gl[l], fd_partial(lap, x, l), 1e-2) < 1e-5);
      }
    }
  }

  TEST_CASE("grad_theta: linear-in-c structure and finite differences") {
    Rng rng = make_rng(23);
    auto ms = ModelSpec::periodic_sine_tanh(2, 3);
    auto th = random_theta(ms, rng);
    std::vector<double> x{0.25, -0.4};
    std::vector<double> gt(ms.param_count());
    grad_theta_d(ms, th.values, x, gt);
    // component for c_i equals tanh(a_i . sin(pi(x - beta)) - b_i)
    for (int i = 0; i < ms.n; ++i) {
      double z = -th.values[ms.pst_b(i)];
      for (int j = 0; j < 2; ++j)
        z += th.values[ms.pst_a(i) + j] *
             std::sin(kPi * (x[j] - th.values[ms.pst_beta() + j]));
      CHECK(gt[ms.pst_c(i)] == doctest::Approx(std::tanh(z)).epsilon(1e-12));
    }
    // w-component of the mixture equals the bare exponential factor
    auto gm = ModelSpec::gaussian_mixture(2, 2);
    auto tg = random_theta(gm, rng);
    std::vector<double> xg{0.1, 0.6};
    std::vector<double> gtg(gm.param_count());
    grad_theta_d(gm, tg.values, xg, gtg);
    for (int i = 0; i < gm.n; ++i) {
      double q = 0.0;
      for (int j = 0; j < 2; ++j) {
        double r = xg[j] - tg.values[gm.gm_b(i) + j];
        double a = tg.values[gm.gm_a(i) + j];
        q += a * a * r * r;
      }
      CHECK(gtg[gm.gm_w(i)] == doctest::Approx(std::exp(-0.5 * q)).epsilon(1e-12));
    }

    for (const auto& spec : specs_under_test()) {
      CAPTURE(family_name(spec.family));
      auto thr = random_theta(spec, rng);
      std::vector<double> xr(spec.d);
      for (auto& v : xr) v = uniform(rng, -0.9, 0.9);
      std::vector<double> gr(spec.param_count());
      grad_theta_d(spec, thr.values, xr, gr);
      auto f = [&](std::span<const double> q) { return eval_d(spec, q, xr); };
      for (int i = 0; i < spec.param_count(); ++i)
        CHECK(relerr(gr[i], fd_partial(f, thr.values, std::size_t(i))) < 1e-6);
    }
  }

  TEST_CASE("grad_theta agrees with the tape pullback of eval (two paths)") {
    Rng rng = make_rng(31);
    for (const auto& ms : specs_under_test()) {
      CAPTURE(family_name(ms.family));
      auto th = random_theta(ms, rng);
      std::vector<double> x(ms.d);
      for (auto& v : x) v = uniform(rng, -0.9, 0.9);

      ad::TapeBuilder tb;
      int st = tb.input_slot("theta", ms.param_count());
      int sx = tb.input_slot("x", ms.d);
      auto tv = tb.slot_vars(st);
      auto xv = tb.slot_vars(sx);
      tb.mark_output(rom::eval<ad::Var, ad::Var>(ms, tv, xv));
      ad::Tape tape = tb.build();
      std::span<const double> sth(th.values), sxx(x);
      std::vector<double> ct{1.0};
      auto g = ad::vjp(tape, std::array{sth, sxx}, ct);

      std::vector<double> ga(ms.param_count());
      grad_theta_d(ms, th.values, x, ga);
      for (int i = 0; i < ms.param_count(); ++i)
        CHECK(std::abs(ga[i] - g.slot(0)[i]) <=
              1e-10 * std::max(1.0, std::abs(ga[i])));
    }
  }

  TEST_CASE("grad_theta dotted with a direction equals the model jvp") {
    Rng rng = make_rng(37);
    for (const auto& ms : specs_under_test()) {
      auto th = random_theta(ms, rng);
      std::vector<double> x(ms.d);
      for (auto& v : x) v = uniform(rng, -0.9, 0.9);
      std::vector<double> gt(ms.param_count());
      grad_theta_d(ms, th.values, x, gt);
      for (int rep = 0; rep < 10; ++rep) {
        std::vector<ad::Dual<double>> thd(ms.param_count());
        std::vector<double> dir(ms.param_count());
        for (int i = 0; i < ms.param_count(); ++i) {
          dir[i] = normal(rng);
          thd[i] = {th.values[i], dir[i]};
        }
        auto u = rom::eval<ad::Dual<double>, double>(ms, thd, std::span<const double>(x));
        CHECK(std::abs(u.d - dot(gt, dir)) <= 1e-10 * std::max(1.0, std::abs(u.d)));
      }
    }
  }
}

TEST_SUITE("operators") {
  TEST_CASE("heat equals laplacian exactly") {
    Rng rng = make_rng(3);
    auto ms = ModelSpec::periodic_sine_tanh(2, 3);
    auto th = random_theta(ms, rng);
    std::vector<double> x{0.2, 0.4};
    pde::OperatorSpec heat;
    CHECK(pde::apply_d(heat, ms, th.values, x) == laplacian_d(ms, th.values, x));
  }

  TEST_CASE("hjb recomposes from model primitives (reversed-time sign)") {
    Rng rng = make_rng(4);
    auto ms = ModelSpec::gaussian_mixture(2, 3);
    auto th = random_theta(ms, rng);
    std::vector<double> x{0.4, -0.2};
    pde::OperatorSpec hjb{pde::OpKind::Hjb, 0.2, 2.0};
    std::vector<double> g(2);
    grad_x_d(ms, th.values, x, g);
    double expect = 0.2 * laplacian_d(ms, th.values, x) - 0.5 * (g[0] * g[0] + g[1] * g[1]);
    CHECK(std::abs(pde::apply_d(hjb, ms, th.values, x) - expect) < 1e-12);
    // zero function: F[0] = 0
    ParamVector z(ms);
    for (int i = 0; i < ms.n; ++i)
      for (int j = 0; j < ms.d; ++j) z.values[ms.gm_a(i) + j] = 1.0;
    CHECK(pde::apply_d(hjb, ms, z.values, x) == 0.0);
  }

  TEST_CASE("tanh_flux: constants give zero, small u linearizes to speed * sum du") {
    auto ms = ModelSpec::sine_modes(2, {1, 0, 0, 1});
    pde::OperatorSpec tf{pde::OpKind::TanhFlux, 0.0, 2.0};
    // constant field: SineModes cannot make constants != 0, use zero coeffs
    ParamVector z(ms);
    std::vector<double> x{0.3, 0.1};
    CHECK(pde::apply_d(tf, ms, z.values, x) == 0.0);

    ParamVector small(ms);
    small.values = {1e-7, -2e-7};
    std::vector<double> g(2);
    grad_x_d(ms, small.values, x, g);
    double lin = 2.0 * (g[0] + g[1]);
    CHECK(std::abs(pde::apply_d(tf, ms, small.values, x) - lin) <
          1e-5 * std::max(1e-30, std::abs(lin)));
  }

  TEST_CASE("apply_grad_x matches finite differences of apply") {
    Rng rng = make_rng(6);
    std::vector<pde::OperatorSpec> ops = {{pde::OpKind::Heat, 0.2, 2.0},
                                          {pde::OpKind::TanhFlux, 0.2, 2.0},
                                          {pde::OpKind::Hjb, 0.2, 2.0}};
    for (const auto& ms : specs_under_test()) {
      for (const auto& op : ops) {
        CAPTURE(family_name(ms.family));
        CAPTURE(pde::op_name(op.kind));
        auto th = random_theta(ms, rng);
        std::vector<double> x(ms.d);
        for (auto& v : x) v = uniform(rng, -0.8, 0.8);
        std::vector<double> gf(ms.d);
        pde::apply_grad_x<double, double>(op, ms, th.values, x, gf);
        auto f = [&](std::span<const double> q) { return pde::apply_d(op, ms, th.values, q); };
        for (int l = 0; l < ms.d; ++l)
          CHECK(std::abs(gf[l] - fd_partial(f, x, l)) <=
                1e-4 * std::max(1.0, std::abs(gf[l])));
      }
    }
  }
}
