// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace pf::opt {

struct AdamParams {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::size_t n, AdamParams p) : p_(p), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, t_);
    const double c2 = 1.0 - std::pow(p_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = p_.beta1 * m_[i] + (1.0 - p_.beta1) * grad[i];
      v_[i] = p_.beta2 * v_[i] + (1.0 - p_.beta2) * grad[i] * grad[i];
      params[i] -= p_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + p_.eps);
    }
  }

  void set_lr(double lr) { p_.lr = lr; }
  double lr() const { return p_.lr; }

  void reset() {
    t_ = 0;
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
  }

 private:
  AdamParams p_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace pf::opt
