// SPDX-License-Identifier: Apache-2.0
#include "paramflow/galerkin.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace pf::oracle {

GramSystem assemble_gram(const rom::ModelSpec& ms, const pde::OperatorSpec& op,
                         std::span<const double> theta, std::span<const double> pts,
                         std::span<const double> wts, double lambda) {
  const int m = ms.param_count();
  const int d = ms.d;
  const int n = static_cast<int>(wts.size());
  GramSystem sys;
  sys.lambda = lambda;
  sys.G.assign(std::size_t(m) * m, 0.0);
  sys.p.assign(m, 0.0);
  std::vector<double> gt(m);
  for (int k = 0; k < n; ++k) {
    auto x = pts.subspan(std::size_t(k) * d, d);
    rom::grad_theta<double, double>(ms, theta, x, gt);
    const double F = pde::apply<double, double>(op, ms, theta, x);
    const double w = wts[k] / n;
    for (int i = 0; i < m; ++i) {
      const double wi = w * gt[i];
      sys.p[i] += wi * F;
      double* row = sys.G.data() + std::size_t(i) * m;
      for (int j = i; j < m; ++j) row[j] += wi * gt[j];
    }
  }
  // mirror the upper triangle
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < i; ++j) sys.G[std::size_t(i) * m + j] = sys.G[std::size_t(j) * m + i];
  return sys;
}

double solve_gram(GramSystem& sys, std::span<double> delta, int* escalations) {
  const int m = static_cast<int>(sys.p.size());
  Eigen::Map<const Eigen::MatrixXd> G(sys.G.data(), m, m);
  Eigen::Map<const Eigen::VectorXd> p(sys.p.data(), m);
  Eigen::Map<Eigen::VectorXd> x(delta.data(), m);

  double lam = sys.lambda;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd A = G;
    if (lam > 0.0) A.diagonal().array() += lam;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() == Eigen::Success) {
      x = ldlt.solve(p);
      if (x.allFinite()) {
        sys.lambda = lam;
        double pn = p.norm();
        return (G * x - p).norm() / std::max(pn, 1e-300);
      }
    }
    // singular or contaminated solve: escalate the ridge and retry
    lam = std::max(lam * 10.0, 1e-8);
    if (escalations) ++*escalations;
  }
  throw std::runtime_error("gram: factorization failed even with escalated ridge");
}

MarchResult time_march_targets(const rom::ModelSpec& ms, const pde::OperatorSpec& op,
                               const std::vector<rom::ParamVector>& starts,
                               const rom::DomainSampler& dom, const MarchOptions& opt, Rng& rng) {
  if (!(opt.lambda >= 0.0)) throw std::invalid_argument("march: lambda must be >= 0");
  if (opt.steps < 1 || opt.mc_points < 1)
    throw std::invalid_argument("march: steps and mc_points must be >= 1");
  const int m = ms.param_count();
  const int d = ms.d;

  MarchResult res;
  std::vector<double> pts(std::size_t(opt.mc_points) * d), wts(opt.mc_points), delta(m);
  for (const auto& th0 : starts) {
    rom::ParamVector th = th0;
    double worst = 0.0;
    for (int k = 0; k < opt.steps; ++k) {
      rom::sample_domain(dom, ms, th.values, opt.mc_points, rng, pts, wts);
      GramSystem sys = assemble_gram(ms, op, th.values, pts, wts, opt.lambda);
      worst = std::max(worst, solve_gram(sys, delta, &res.lambda_escalations));
      axpy(opt.dt, delta, th.values);
      if (!all_finite(th.values))
        throw std::runtime_error("march: non-finite parameters at step " + std::to_string(k));
    }
    res.targets.start.push_back(th0);
    res.targets.end.push_back(std::move(th));
    res.max_rel_residual.push_back(worst);
  }
  return res;
}

}  // namespace pf::oracle
