// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "paramflow/galerkin.hpp"
#include "paramflow/oracle.hpp"

using namespace pf;
using namespace pf::oracle;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_SUITE("heat_oracles") {
  TEST_CASE("normalized kernel: g == 1 averages to exactly 1") {
    Rng rng = make_rng(1);
    rom::TargetFn one = [](std::span<const double>) { return 1.0; };
    std::vector<double> x{0.3, -0.4};
    auto est = heat_exact(one, x, 0.37, 500, rng);
    CHECK(est.value == 1.0);
    CHECK(est.std_error == 0.0);
  }

  TEST_CASE("t = 0 returns g(x)") {
    Rng rng = make_rng(2);
    rom::TargetFn g = [](std::span<const double> x) { return x[0] * x[0] - x[1]; };
    std::vector<double> x{0.5, 0.25};
    CHECK(heat_exact(g, x, 0.0, 10, rng).value == doctest::Approx(g(x)));
  }

  TEST_CASE("eigenmode decay: MC estimate within 3 standard errors of the closed form") {
    Rng rng = make_rng(3);
    std::vector<int> k{1, 2};
    rom::TargetFn g = [&](std::span<const double> x) {
      return std::sin(kPi * (x[0] + 2 * x[1]));
    };
    for (double t : {0.01, 0.05, 0.1}) {
      std::vector<double> x{0.21, -0.4};
      auto est = heat_exact(g, x, t, 20000, rng);
      double exact = heat_mode_exact(k, 1.0, x, t);
      CHECK(std::abs(est.value - exact) < 3.0 * est.std_error + 1e-12);
    }
  }

  TEST_CASE("heat_mode_exact: terminal, asymptotic, and decay-factor values") {
    std::vector<int> k{1, 0};
    std::vector<double> x{0.5, 0.9};
    CHECK(heat_mode_exact(k, 2.0, x, 0.0) ==
          doctest::Approx(2.0 * std::sin(kPi * 0.5)).epsilon(1e-14));
    CHECK(std::abs(heat_mode_exact(k, 2.0, x, 50.0)) < 1e-200);
    // decay factor at t = 0.1 is exp(-pi^2/10) ~ 0.3727
    double ratio = heat_mode_exact(k, 1.0, x, 0.1) / heat_mode_exact(k, 1.0, x, 0.0);
    CHECK(ratio == doctest::Approx(std::exp(-kPi * kPi * 0.1)).epsilon(1e-12));
    CHECK(ratio == doctest::Approx(0.3727).epsilon(1e-3));
  }

  TEST_CASE("MC error shrinks like n^{-1/2} on repeated estimates") {
    Rng rng = make_rng(4);
    std::vector<int> k{1, 0};
    rom::TargetFn g = [&](std::span<const double> x) { return std::sin(kPi * x[0]); };
    std::vector<double> x{0.3, 0.1};
    double exact = heat_mode_exact(k, 1.0, x, 0.05);
    auto mean_abs_err = [&](int n_mc) {
      double acc = 0.0;
      for (int rep = 0; rep < 30; ++rep)
        acc += std::abs(heat_exact(g, x, 0.05, n_mc, rng).value - exact);
      return acc / 30;
    };
    double e_small = mean_abs_err(200);
    double e_big = mean_abs_err(3200);  // 16x points -> ~4x smaller error
    CHECK(e_big < e_small / 2.0);
  }

  TEST_CASE("spectral oracle reproduces eigenmodes to near machine precision") {
    rom::TargetFn g = [&](std::span<const double> x) {
      return 0.7 * std::sin(kPi * (x[0] + x[1])) - 0.2 * std::sin(kPi * (2 * x[0] - x[1]));
    };
    HeatSpectral spectral(g, 2, 8, 32);
    Rng rng = make_rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> x{uniform(rng, -1, 1), uniform(rng, -1, 1)};
      for (double t : {0.0, 0.01, 0.1}) {
        std::vector<int> k1{1, 1}, k2{2, -1};
        double exact = heat_mode_exact(k1, 0.7, x, t) + heat_mode_exact(k2, -0.2, x, t);
        CHECK(std::abs(spectral.value(x, t) - exact) < 1e-10);
      }
    }
  }

  TEST_CASE("spectral oracle agrees with kernel averaging on a smooth periodic g") {
    auto ms = rom::ModelSpec::periodic_sine_tanh(2, 3);
    Rng rng = make_rng(6);
    auto th = rom::sample_initial(rom::InitSampler{rom::GaussianSampler{0.0, 0.5}}, ms, rng);
    rom::TargetFn g = [&](std::span<const double> x) { return rom::eval_d(ms, th.values, x); };
    HeatSpectral spectral(g, 2, 16, 48);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> x{uniform(rng, -1, 1), uniform(rng, -1, 1)};
      auto est = heat_exact(g, x, 0.05, 40000, rng);
      CHECK(std::abs(spectral.value(x, 0.05) - est.value) < 3.0 * est.std_error + 1e-6);
    }
  }
}

TEST_SUITE("upwind") {
  TEST_CASE("zero and constant profiles are preserved") {
    auto zero = upwind_1d([](double) { return 0.0; }, 0.15, 200, 100);
    auto cons = upwind_1d([](double) { return 0.8; }, 0.15, 200, 100);
    for (int r : {0, 100, 200}) {
      CHECK(zero.total_variation(r) == 0.0);
      for (int i = 0; i < 100; ++i) {
        CHECK(zero.u[std::size_t(r) * 100 + i] == 0.0);
        CHECK(cons.u[std::size_t(r) * 100 + i] == doctest::Approx(0.8).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("CFL violation is refused with the required step count") {
    CHECK_THROWS_WITH_AS((void)upwind_1d([](double) { return 0.0; }, 1.0, 10, 1000, 2.0),
                         doctest::Contains("need n_t >= 1000"), std::invalid_argument);
  }

  TEST_CASE("mass conservation and TVD on a steepening profile") {
    auto g = [](double y) { return 0.8 * std::sin(kPi * y) + 0.1; };
    auto sol = upwind_1d(g, 0.15, 600, 300);
    double m0 = sol.integral(0);
    for (int r = 1; r <= 600; ++r) {
      CHECK(std::abs(sol.integral(r) - m0) < 1e-10);
      CHECK(sol.total_variation(r) <= sol.total_variation(r - 1) + 1e-12);
    }
  }

  TEST_CASE("interpolation matches grid nodes and wraps periodically") {
    auto g = [](double y) { return std::sin(kPi * y); };
    auto sol = upwind_1d(g, 0.1, 400, 200);
    CHECK(sol.value(0.0, -1.0) == doctest::Approx(g(-1.0)).epsilon(1e-12));
    CHECK(sol.value(0.0, 0.31) == doctest::Approx(g(0.31)).epsilon(1e-3));
    CHECK(sol.value(0.05, 1.7) == doctest::Approx(sol.value(0.05, -0.3)).epsilon(1e-12));
  }

  TEST_CASE("advection speed matches the linearized flux for small amplitudes") {
    // for |u| << 1, u_t = 2 u_y, so the profile translates left by 2t
    auto g = [](double y) { return 1e-3 * std::sin(kPi * y); };
    auto sol = upwind_1d(g, 0.1, 4000, 1000);
    double got = sol.value(0.1, 0.2);
    double want = g(0.2 + 2 * 0.1);
    CHECK(got == doctest::Approx(want).epsilon(0.02));
  }
}

TEST_SUITE("cole_hopf") {
  TEST_CASE("zero terminal cost gives the zero value function") {
    Rng rng = make_rng(7);
    rom::TargetFn g = [](std::span<const double>) { return 0.0; };
    std::vector<double> x{0.2, -0.4};
    CHECK(cole_hopf(g, x, 0.3, 1.0, 0.2, 2000, rng) == doctest::Approx(0.0).epsilon(1e-14));
  }

  TEST_CASE("constant shift passes through exactly") {
    Rng rng = make_rng(8);
    const double c = -0.45;
    rom::TargetFn g = [&](std::span<const double>) { return c; };
    std::vector<double> x{1.0, 2.0};
    for (double t : {0.0, 0.5, 0.99})
      CHECK(cole_hopf(g, x, t, 1.0, 0.2, 500, rng) == doctest::Approx(c).epsilon(1e-12));
    CHECK(cole_hopf(g, x, 1.0, 1.0, 0.2, 500, rng) == c);  // t = T short-circuit
  }

  TEST_CASE("terminal condition is approached as t -> T") {
    Rng rng = make_rng(9);
    rom::TargetFn g = [](std::span<const double> x) {
      return -0.8 * std::exp(-x[0] * x[0] - x[1] * x[1]);
    };
    std::vector<double> x{0.4, -0.1};
    double e3 = std::abs(cole_hopf(g, x, 1.0 - 1e-3, 1.0, 0.2, 200000, rng) - g(x));
    double e4 = std::abs(cole_hopf(g, x, 1.0 - 1e-4, 1.0, 0.2, 200000, rng) - g(x));
    CHECK(e4 < e3);
    CHECK(e3 < 0.01);
  }

  TEST_CASE("d=1 MC value agrees with dense trapezoid quadrature within 1%") {
    Rng rng = make_rng(10);
    rom::TargetFn g = [](std::span<const double> x) {
      return -0.9 * std::exp(-(x[0] - 0.3) * (x[0] - 0.3) / 0.5);
    };
    const double eps = 0.2, T = 1.0, t = 0.4;
    std::vector<double> x{0.1};
    double mc = cole_hopf(g, x, t, T, eps, 200000, rng);

    // quadrature of E_{y~N(x, 2 eps (T-t))}[exp(-g(y)/(2 eps))]
    const double var = 2.0 * eps * (T - t);
    const double lo = x[0] - 10 * std::sqrt(var), hi = x[0] + 10 * std::sqrt(var);
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      double y = lo + (hi - lo) * i / n;
      double kern = std::exp(-(y - x[0]) * (y - x[0]) / (2 * var)) / std::sqrt(2 * kPi * var);
      std::vector<double> yy{y};
      double f = kern * std::exp(-g(yy) / (2 * eps));
      acc += (i == 0 || i == n) ? 0.5 * f : f;
    }
    acc *= (hi - lo) / n;
    double quad = -2.0 * eps * std::log(acc);
    CHECK(std::abs(mc - quad) / std::abs(quad) < 0.01);
  }

  TEST_CASE("argument validation") {
    Rng rng = make_rng(11);
    rom::TargetFn g = [](std::span<const double>) { return 0.0; };
    std::vector<double> x{0.0};
    CHECK_THROWS_AS((void)cole_hopf(g, x, 0.5, 1.0, -0.1, 10, rng), std::invalid_argument);
    CHECK_THROWS_AS((void)cole_hopf(g, x, 1.5, 1.0, 0.2, 10, rng), std::invalid_argument);
  }
}

TEST_SUITE("galerkin") {
  TEST_CASE("zero operator image leaves parameters in place") {
    // all mixture weights zero: u = 0, F[u] = 0, so p = 0 and delta = 0
    auto ms = rom::ModelSpec::gaussian_mixture(2, 2);
    rom::ParamVector th(ms);
    for (int i = 0; i < ms.n; ++i)
      for (int j = 0; j < ms.d; ++j) {
        th.values[ms.gm_a(i) + j] = 1.0 + 0.2 * i;
        th.values[ms.gm_b(i) + j] = 0.3 * j;
      }
    Rng rng = make_rng(12);
    MarchOptions opt;
    opt.dt = 0.01;
    opt.steps = 20;
    auto res = time_march_targets(ms, pde::OperatorSpec{}, {th}, rom::BoxDomain{}, opt, rng);
    CHECK(res.targets.end[0].values == th.values);
  }

  TEST_CASE("1-mode heat marching tracks the exponential within 1%") {
    auto ms = rom::ModelSpec::sine_modes(1, {1});
    rom::ParamVector th(ms);
    th.values[0] = 1.4;
    Rng rng = make_rng(13);
    MarchOptions opt;
    opt.dt = 0.001;
    opt.steps = 100;  // T = 0.1
    opt.mc_points = 512;
    auto res = time_march_targets(ms, pde::OperatorSpec{}, {th}, rom::BoxDomain{}, opt, rng);
    double want = 1.4 * std::exp(-kPi * kPi * 0.1);
    CHECK(res.targets.end[0].values[0] == doctest::Approx(want).epsilon(0.01));
    CHECK(res.max_rel_residual[0] < 1e-6);
  }

  TEST_CASE("singular normal equations escalate the ridge and stay finite") {
    GramSystem sys;
    sys.G = {1.0, 1.0, 1.0, 1.0};  // rank deficient
    sys.p = {1.0, 1.0};
    sys.lambda = 0.0;
    std::vector<double> delta(2);
    int esc = 0;
    double res = solve_gram(sys, delta, &esc);
    CHECK(all_finite(delta));
    CHECK(res < 1e-6);  // consistent right-hand side
  }
}

TEST_SUITE("error_curves") {
  TEST_CASE("model against itself gives a zero curve") {
    auto ms = rom::ModelSpec::sine_modes(1, {1});
    ode::Trajectory tr;
    tr.dim = 1;
    tr.t = {0.0, 1.0};
    tr.y = {0.9, 0.9};
    SpaceTimeFn oracle = [&](std::span<const double> x, double) {
      std::vector<double> th{0.9};
      return rom::eval_d(ms, th, x);
    };
    Rng rng = make_rng(14);
    std::vector<double> grid{0.0, 0.5, 1.0};
    auto curve = relative_error_curve(ms, tr, oracle, rom::BoxDomain{}, grid, 256, rng);
    for (const auto& pt : curve) {
      CHECK(pt.valid);
      CHECK(pt.rel < 1e-14);
    }
  }

  TEST_CASE("frozen model against a decaying mode grows like e^{pi^2 t} - 1") {
    auto ms = rom::ModelSpec::sine_modes(1, {1});
    ode::Trajectory tr;
    tr.dim = 1;
    tr.t = {0.0, 0.2};
    tr.y = {1.0, 1.0};  // constant in time
    std::vector<int> k{1};
    SpaceTimeFn oracle = [&](std::span<const double> x, double t) {
      return heat_mode_exact(k, 1.0, x, t);
    };
    Rng rng = make_rng(15);
    std::vector<double> grid{0.05, 0.1, 0.2};
    auto curve = relative_error_curve(ms, tr, oracle, rom::BoxDomain{}, grid, 512, rng);
    double prev = 0.0;
    for (const auto& pt : curve) {
      double want = std::exp(kPi * kPi * pt.t) - 1.0;
      CHECK(pt.rel == doctest::Approx(want).epsilon(1e-10));
      CHECK(pt.rel > prev);
      prev = pt.rel;
    }
  }

  TEST_CASE("vanishing oracle marks points invalid instead of dividing") {
    auto ms = rom::ModelSpec::sine_modes(1, {1});
    ode::Trajectory tr;
    tr.dim = 1;
    tr.t = {0.0, 1.0};
    tr.y = {1.0, 1.0};
    SpaceTimeFn oracle = [](std::span<const double>, double) { return 0.0; };
    Rng rng = make_rng(16);
    std::vector<double> grid{0.5};
    auto curve = relative_error_curve(ms, tr, oracle, rom::BoxDomain{}, grid, 64, rng);
    CHECK_FALSE(curve[0].valid);
  }

  TEST_CASE("aggregation: mean/std across curves, invalid points excluded") {
    std::vector<std::vector<ErrPoint>> curves{
        {{0.0, 0.1, true}, {1.0, 0.2, true}},
        {{0.0, 0.3, true}, {1.0, 0.0, false}},
    };
    auto st = aggregate_curves(curves);
    CHECK(st.mean[0] == doctest::Approx(0.2));
    CHECK(st.mean[1] == doctest::Approx(0.2));
    CHECK(st.count[1] == 1);
    CHECK(st.stddev[0] == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
  }
}
