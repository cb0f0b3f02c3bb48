// SPDX-License-Identifier: Apache-2.0
#include "paramflow/control.hpp"

#include <cmath>

namespace pf::ctrl {

namespace {
int layer_params(int rows, int cols) { return rows * cols + rows; }
}  // namespace

ControlLayout::ControlLayout(const ControlNetSpec& s) {
  int ofs = 0;
  auto take = [&](int rows, int cols) {
    LayerRef ly{ofs, ofs + rows * cols, rows, cols};
    ofs += layer_params(rows, cols);
    return ly;
  };
  // xi_s
  gate.push_back(take(s.width, s.m));
  for (int l = 1; l < s.depth; ++l) gate.push_back(take(s.width, s.width));
  gate_head = take(1, s.width);
  // xi_r
  res_in = take(s.width, s.m);
  for (int l = 0; l < s.depth; ++l) {
    res_w1.push_back(take(s.width, s.width));
    res_w2.push_back(take(s.width, s.width));
  }
  res_out = take(s.m, s.width);
  // xi_e
  mlp.push_back(take(s.width, s.m));
  for (int l = 1; l < s.depth; ++l) mlp.push_back(take(s.width, s.width));
  mlp_out = take(s.m, s.width);
  total = ofs;
}

int ControlNetSpec::gate_count() const {
  int c = layer_params(width, m);
  for (int l = 1; l < depth; ++l) c += layer_params(width, width);
  return c + layer_params(1, width);
}

int ControlNetSpec::res_count() const {
  return layer_params(width, m) + depth * 2 * layer_params(width, width) +
         layer_params(m, width);
}

int ControlNetSpec::mlp_count() const {
  int c = layer_params(width, m);
  for (int l = 1; l < depth; ++l) c += layer_params(width, width);
  return c + layer_params(m, width);
}

int ControlNetSpec::param_count() const { return gate_count() + res_count() + mlp_count(); }

ControlParams init_params(const ControlNetSpec& spec, Rng& rng) {
  spec.validate();
  ControlParams p(spec);
  const ControlLayout L(spec);
  auto he = [&](const LayerRef& ly) {
    double s = std::sqrt(2.0 / ly.cols);
    for (int k = 0; k < ly.rows * ly.cols; ++k) p.values[ly.w_off + k] = normal(rng, 0.0, s);
  };
  auto xavier = [&](const LayerRef& ly) {
    double s = std::sqrt(2.0 / (ly.rows + ly.cols));
    for (int k = 0; k < ly.rows * ly.cols; ++k) p.values[ly.w_off + k] = normal(rng, 0.0, s);
  };
  for (const auto& ly : L.gate) xavier(ly);
  xavier(L.gate_head);
  xavier(L.res_in);
  for (int l = 0; l < spec.depth; ++l) he(L.res_w1[l]);  // res_w2 stays zero
  xavier(L.res_out);
  for (const auto& ly : L.mlp) he(ly);  // mlp_out stays zero
  return p;
}

std::vector<double> eval_field_d(const ControlParams& xi, std::span<const double> theta) {
  return eval_field<double>(xi.spec, xi.values, theta);
}

namespace {

// y += W x (W rows x cols at off)
void matvec_add(std::span<const double> p, const LayerRef& ly, std::span<const double> x,
                std::span<double> y) {
  for (int j = 0; j < ly.rows; ++j) {
    double s = 0.0;
    const double* w = p.data() + ly.w_off + std::size_t(j) * ly.cols;
    for (int k = 0; k < ly.cols; ++k) s += w[k] * x[k];
    y[j] += s + p[ly.b_off + j];
  }
}

// xbar += W^T ybar
void mat_t_vec_add(std::span<const double> p, const LayerRef& ly, std::span<const double> ybar,
                   std::span<double> xbar) {
  for (int j = 0; j < ly.rows; ++j) {
    const double* w = p.data() + ly.w_off + std::size_t(j) * ly.cols;
    for (int k = 0; k < ly.cols; ++k) xbar[k] += w[k] * ybar[j];
  }
}

// dW += ybar x^T, db += ybar
void accum_grads(std::span<double> g, const LayerRef& ly, std::span<const double> ybar,
                 std::span<const double> x) {
  for (int j = 0; j < ly.rows; ++j) {
    double* gw = g.data() + ly.w_off + std::size_t(j) * ly.cols;
    for (int k = 0; k < ly.cols; ++k) gw[k] += ybar[j] * x[k];
    g[ly.b_off + j] += ybar[j];
  }
}

}  // namespace

void field_vjp(const ControlParams& xi, std::span<const double> theta,
               std::span<const double> cotangent, std::span<double> dtheta,
               std::span<double> dxi) {
  const auto& spec = xi.spec;
  spec.validate();
  if (static_cast<int>(theta.size()) != spec.m ||
      static_cast<int>(cotangent.size()) != spec.m)
    throw std::invalid_argument("control: dimension mismatch in field_vjp");
  const ControlLayout L(spec);
  const std::span<const double> p(xi.values);
  const int m = spec.m, w = spec.width, depth = spec.depth;

  // ---- forward with caches ----
  std::vector<std::vector<double>> gh;  // gate activations per layer
  std::vector<double> cur(theta.begin(), theta.end());
  for (const auto& ly : L.gate) {
    std::vector<double> nxt(ly.rows, 0.0);
    matvec_add(p, ly, cur, nxt);
    for (double& v : nxt) v = ad::sigmoid(v);
    gh.push_back(nxt);
    cur = std::move(nxt);
  }
  double zh = p[L.gate_head.b_off];
  for (int k = 0; k < w; ++k) zh += p[L.gate_head.w_off + k] * gh.back()[k];
  const double gate = ad::sigmoid(zh);

  std::vector<std::vector<double>> ys(depth + 1), ts(depth);
  ys[0].assign(w, 0.0);
  matvec_add(p, L.res_in, theta, ys[0]);
  for (int l = 0; l < depth; ++l) {
    ts[l].assign(w, 0.0);
    matvec_add(p, L.res_w1[l], ys[l], ts[l]);
    for (double& v : ts[l]) v = ad::relu(v);
    ys[l + 1] = ys[l];
    std::vector<double> upd(w, 0.0);
    matvec_add(p, L.res_w2[l], ts[l], upd);
    for (int j = 0; j < w; ++j) ys[l + 1][j] += upd[j];
  }
  std::vector<double> r(m, 0.0);
  matvec_add(p, L.res_out, ys[depth], r);

  std::vector<std::vector<double>> eh;
  cur.assign(theta.begin(), theta.end());
  for (const auto& ly : L.mlp) {
    std::vector<double> nxt(ly.rows, 0.0);
    matvec_add(p, ly, cur, nxt);
    for (double& v : nxt) v = ad::relu(v);
    eh.push_back(nxt);
    cur = std::move(nxt);
  }
  std::vector<double> e(m, 0.0);
  matvec_add(p, L.mlp_out, eh.back(), e);

  // ---- reverse ----
  fill(dtheta, 0.0);
  fill(dxi, 0.0);
  double gbar = 0.0;
  std::vector<double> rbar(m), ebar(m);
  for (int j = 0; j < m; ++j) {
    const double inner = r[j] + e[j] * theta[j];
    gbar += cotangent[j] * inner;
    rbar[j] = cotangent[j] * gate;
    ebar[j] = cotangent[j] * gate * theta[j];
    dtheta[j] += cotangent[j] * gate * e[j];
  }

  // gate head and MLP
  const double zhbar = gbar * gate * (1.0 - gate);
  for (int k = 0; k < w; ++k) dxi[L.gate_head.w_off + k] += zhbar * gh.back()[k];
  dxi[L.gate_head.b_off] += zhbar;
  std::vector<double> hbar(w, 0.0);
  for (int k = 0; k < w; ++k) hbar[k] = p[L.gate_head.w_off + k] * zhbar;
  for (int l = depth - 1; l >= 0; --l) {
    const auto& act = gh[l];
    std::vector<double> zbar(L.gate[l].rows);
    for (int j = 0; j < L.gate[l].rows; ++j) zbar[j] = hbar[j] * act[j] * (1.0 - act[j]);
    std::span<const double> in =
        (l == 0) ? theta : std::span<const double>(gh[l - 1]);
    accum_grads(dxi, L.gate[l], zbar, in);
    if (l == 0) {
      mat_t_vec_add(p, L.gate[0], zbar, dtheta);
    } else {
      hbar.assign(L.gate[l].cols, 0.0);
      mat_t_vec_add(p, L.gate[l], zbar, hbar);
    }
  }

  // ResNet
  std::vector<double> ybar(w, 0.0);
  accum_grads(dxi, L.res_out, rbar, ys[depth]);
  mat_t_vec_add(p, L.res_out, rbar, ybar);
  for (int l = depth - 1; l >= 0; --l) {
    std::vector<double> tbar(w, 0.0);
    accum_grads(dxi, L.res_w2[l], ybar, ts[l]);
    mat_t_vec_add(p, L.res_w2[l], ybar, tbar);
    std::vector<double> pbar(w);
    for (int j = 0; j < w; ++j) pbar[j] = ts[l][j] > 0.0 ? tbar[j] : 0.0;
    accum_grads(dxi, L.res_w1[l], pbar, ys[l]);
    mat_t_vec_add(p, L.res_w1[l], pbar, ybar);  // identity path already in ybar
  }
  accum_grads(dxi, L.res_in, ybar, theta);
  mat_t_vec_add(p, L.res_in, ybar, dtheta);

  // phi_e MLP
  std::vector<double> hb(w, 0.0);
  accum_grads(dxi, L.mlp_out, ebar, eh.back());
  mat_t_vec_add(p, L.mlp_out, ebar, hb);
  for (int l = depth - 1; l >= 0; --l) {
    std::vector<double> zbar(L.mlp[l].rows);
    const auto& act = eh[l];
    for (int j = 0; j < L.mlp[l].rows; ++j) zbar[j] = act[j] > 0.0 ? hb[j] : 0.0;
    std::span<const double> in =
        (l == 0) ? theta : std::span<const double>(eh[l - 1]);
    accum_grads(dxi, L.mlp[l], zbar, in);
    if (l == 0) {
      mat_t_vec_add(p, L.mlp[0], zbar, dtheta);
    } else {
      hb.assign(L.mlp[l].cols, 0.0);
      mat_t_vec_add(p, L.mlp[l], zbar, hb);
    }
  }
}

}  // namespace pf::ctrl
