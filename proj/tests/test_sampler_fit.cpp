// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "paramflow/fit.hpp"
#include "paramflow/sampler.hpp"

using namespace pf;
using namespace pf::rom;

TEST_SUITE("sampler") {
  TEST_CASE("uniform ball stays inside the radius") {
    auto ms = ModelSpec::periodic_sine_tanh(2, 4);
    Rng rng = make_rng(1);
    auto draws = sample_initials(InitSampler{UniformBallSampler{20.0}}, ms, 500, rng);
    double mx = 0.0;
    for (const auto& th : draws) {
      double r = norm2(th.values);
      CHECK(r <= 20.0 + 1e-12);
      mx = std::max(mx, r);
    }
    CHECK(mx > 15.0);  // mass concentrates near the surface in high dimension
  }

  TEST_CASE("gaussian sampler: pooled mean and variance within 3 sigma") {
    auto ms = ModelSpec::periodic_sine_tanh(2, 2);  // m = 10
    Rng rng = make_rng(2);
    const int n_draws = 100000;
    const std::size_t total = std::size_t(n_draws) * ms.param_count();
    double sum = 0.0, sumsq = 0.0;
    GaussianSampler gs{0.0, 0.5};
    for (int k = 0; k < n_draws; ++k) {
      auto th = sample_initial(InitSampler{gs}, ms, rng);
      for (double v : th.values) {
        sum += v;
        sumsq += v * v;
      }
    }
    double mean = sum / total;
    double var = sumsq / total - mean * mean;
    CHECK(std::abs(mean) < 3.0 * std::sqrt(0.5 / total));
    CHECK(std::abs(var - 0.5) < 3.0 * std::sqrt(2.0 * 0.25 / total) + 1e-6);
  }

  TEST_CASE("composite sampler: unit-sphere c block and 1-d structure") {
    auto ms = ModelSpec::periodic_sine_tanh(3, 5);
    Rng rng = make_rng(3);
    SineTanhCompositeSampler comp;
    comp.one_d_structure = true;
    for (int rep = 0; rep < 20; ++rep) {
      auto th = sample_initial(InitSampler{comp}, ms, rng);
      double nc = 0.0;
      for (int i = 0; i < ms.n; ++i) nc += th.values[ms.pst_c(i)] * th.values[ms.pst_c(i)];
      CHECK(std::abs(std::sqrt(nc) - 1.0) < 1e-12);
      for (int i = 0; i < ms.n; ++i)
        for (int j = 1; j < ms.d; ++j) CHECK(th.values[ms.pst_a(i) + j] == 0.0);
    }
  }

  TEST_CASE("hjb box constraints always hold") {
    auto ms = ModelSpec::gaussian_mixture(3, 6);
    Rng rng = make_rng(4);
    for (int rep = 0; rep < 200; ++rep) {
      auto th = sample_initial(InitSampler{HjbBoxSampler{}}, ms, rng);
      for (int i = 0; i < ms.n; ++i) {
        CHECK(th.values[ms.gm_w(i)] > -1.0);
        CHECK(th.values[ms.gm_w(i)] < 0.0);
        double amax = 0.0, bmax = 0.0;
        for (int j = 0; j < ms.d; ++j) {
          amax = std::max(amax, std::abs(th.values[ms.gm_a(i) + j]));
          bmax = std::max(bmax, std::abs(th.values[ms.gm_b(i) + j]));
        }
        CHECK(amax > 0.1);
        CHECK(amax <= 2.0);
        CHECK(bmax <= 2.0);
      }
    }
  }

  TEST_CASE("wrong sampler/model pairing is rejected") {
    auto gm = ModelSpec::gaussian_mixture(2, 2);
    Rng rng = make_rng(5);
    CHECK_THROWS_AS((void)sample_initial(InitSampler{SineTanhCompositeSampler{}}, gm, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        (void)sample_initials(InitSampler{HjbBoxSampler{}}, gm, 0, rng),
        std::invalid_argument);
  }

  TEST_CASE("rho proposal: weight * density == 1, standard-normal case") {
    auto ms = ModelSpec::gaussian_mixture(2, 1);
    ParamVector th(ms);
    th.values[ms.gm_w(0)] = -0.5;
    th.values[ms.gm_a(0)] = 1.0;
    th.values[ms.gm_a(0) + 1] = 1.0;
    Rng rng = make_rng(6);
    const int N = 100000;
    double s[2] = {0, 0}, ss[2] = {0, 0}, cross = 0;
    std::vector<double> x(2);
    for (int k = 0; k < N; ++k) {
      double w = sample_rho(ms, th.values, rng, x);
      CHECK(std::abs(w * rho_density(ms, th.values, x) - 1.0) < 1e-12);
      for (int j = 0; j < 2; ++j) {
        s[j] += x[j];
        ss[j] += x[j] * x[j];
      }
      cross += x[0] * x[1];
    }
    for (int j = 0; j < 2; ++j) {
      double mean = s[j] / N;
      CHECK(std::abs(mean) < 0.02);
      CHECK(std::abs(ss[j] / N - mean * mean - 1.0) < 0.05);
    }
    CHECK(std::abs(cross / N) < 0.02);
  }

  TEST_CASE("rho mixture mean approaches the average of the centers") {
    auto ms = ModelSpec::gaussian_mixture(1, 2);
    ParamVector th(ms);
    th.values[ms.gm_w(0)] = -0.5;
    th.values[ms.gm_w(1)] = -0.5;
    th.values[ms.gm_a(0)] = 1.5;
    th.values[ms.gm_a(1)] = 1.5;
    th.values[ms.gm_b(0)] = -2.0;
    th.values[ms.gm_b(1)] = 1.0;
    Rng rng = make_rng(7);
    double s = 0;
    std::vector<double> x(1);
    const int N = 50000;
    for (int k = 0; k < N; ++k) {
      sample_rho(ms, th.values, rng, x);
      s += x[0];
    }
    CHECK(s / N == doctest::Approx(-0.5).epsilon(0.1));
  }

  TEST_CASE("zero mixture width is rejected") {
    auto ms = ModelSpec::gaussian_mixture(1, 1);
    ParamVector th(ms);  // a = 0
    th.values[ms.gm_w(0)] = -0.5;
    Rng rng = make_rng(8);
    std::vector<double> x(1);
    CHECK_THROWS_AS((void)sample_rho(ms, th.values, rng, x), std::invalid_argument);
  }
}

TEST_SUITE("fit") {
  TEST_CASE("target already represented: zero iterations, zero misfit") {
    auto ms = ModelSpec::periodic_sine_tanh(2, 3);
    Rng rng = make_rng(11);
    auto hat = sample_initial(InitSampler{GaussianSampler{0.0, 0.5}}, ms, rng);
    TargetFn g = [&](std::span<const double> x) { return eval_d(ms, hat.values, x); };
    FitOptions opt;
    auto res = fit_initial(ms, g, BoxDomain{}, opt, rng, &hat);
    CHECK(res.iterations == 0);
    CHECK(res.rel_l2 < 1e-14);
    CHECK(res.converged);
  }

  TEST_CASE("zero target with zero-amplitude start is already optimal") {
    auto ms = ModelSpec::periodic_sine_tanh(2, 2);
    ParamVector zero_c(ms);
    Rng rng = make_rng(12);
    for (int i = 0; i < ms.n; ++i) {
      for (int j = 0; j < ms.d; ++j) zero_c.values[ms.pst_a(i) + j] = normal(rng);
      zero_c.values[ms.pst_b(i)] = normal(rng);
    }
    TargetFn g = [](std::span<const double>) { return 0.0; };
    FitOptions opt;
    auto res = fit_initial(ms, g, BoxDomain{}, opt, rng, &zero_c);
    CHECK(res.rel_l2 == 0.0);
  }

  TEST_CASE("sin(pi x1) in d=2 fits below 1e-3 relative error") {
    auto ms = ModelSpec::periodic_sine_tanh(2, 6);
    Rng rng = make_rng(13);
    TargetFn g = [](std::span<const double> x) { return std::sin(rom::kPi * x[0]); };
    FitOptions opt;
    opt.tolerance = 1e-3;
    opt.max_iters = 1500;
    opt.lr = 1e-2;
    auto res = fit_initial(ms, g, BoxDomain{}, opt, rng);
    CAPTURE(res.rel_l2);
    CHECK(res.converged);
    CHECK(res.rel_l2 < 1e-3);
  }

  TEST_CASE("budget exhaustion returns the best iterate with a failure flag") {
    auto ms = ModelSpec::periodic_sine_tanh(2, 2);
    Rng rng = make_rng(14);
    TargetFn g = [](std::span<const double> x) { return std::sin(rom::kPi * x[0]); };
    FitOptions opt;
    opt.tolerance = 1e-9;  // unattainable at this budget
    opt.max_iters = 20;
    auto res = fit_initial(ms, g, BoxDomain{}, opt, rng);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 20 * opt.restarts);  // budget spent on every restart
    CHECK(std::isfinite(res.rel_l2));
  }
}
