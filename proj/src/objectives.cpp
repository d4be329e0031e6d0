// Copyright 2026 The fmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fmlab/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

Conditioning make_cond(std::span<const double> t, std::span<const double> s,
                       std::span<const int> labels) {
  Conditioning c;
  c.t.assign(t.begin(), t.end());
  c.s.assign(s.begin(), s.end());
  if (labels.empty()) {
    c.labels.assign(t.size(), kNullClass);
  } else {
    c.labels.assign(labels.begin(), labels.end());
  }
  if (c.s.size() != c.t.size() || c.labels.size() != c.t.size()) {
    throw ShapeError("conditioning lengths differ");
  }
  return c;
}

void check_rows(const Tensor& x, std::size_t n, const char* what) {
  if (x.rows() != n) {
    throw ShapeError(std::string(what) + ": " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(n));
  }
}

double mean_row_norm(const Tensor& a) {
  const auto sq = row_squared_norms(a);
  double acc = 0.0;
  for (double v : sq) acc += std::sqrt(v);
  return sq.empty() ? 0.0 : acc / static_cast<double>(sq.size());
}

double mean_sq_distance(const Tensor& a, const Tensor& b) {
  const auto sq = row_squared_norms(a - b);
  double acc = 0.0;
  for (double v : sq) acc += v;
  return sq.empty() ? 0.0 : acc / static_cast<double>(sq.size());
}

}  // namespace

double AdaptiveDistance::row(double squared_norm) const {
  return squared_norm / std::pow(squared_norm + c * c, 1.0 - p);
}

double AdaptiveDistance::operator()(const Tensor& a, const Tensor& b) const {
  require_same_shape(a, b, "adaptive_distance");
  const auto sq = row_squared_norms(a - b);
  double acc = 0.0;
  for (double v : sq) acc += row(v);
  return sq.empty() ? 0.0 : acc / static_cast<double>(sq.size());
}

LossEval AdaptiveDistance::with_grad(const Tensor& prediction, const Tensor& target) const {
  require_same_shape(prediction, target, "adaptive_distance");
  LossEval out{0.0, prediction - target};
  const std::size_t n = prediction.rows();
  if (n == 0) return out;
  const auto sq = row_squared_norms(out.seed);
  std::vector<double> scale(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double denom = std::pow(sq[r] + c * c, 1.0 - p);
    out.loss += sq[r] / denom;
    scale[r] = 2.0 / (denom * static_cast<double>(n));
  }
  out.loss /= static_cast<double>(n);
  out.seed = scale_rows(out.seed, scale);
  return out;
}

LossEval cosine_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "cosine_loss");
  LossEval out{0.0, Tensor(prediction.shape())};
  const std::size_t n = prediction.rows();
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto a = prediction.row_span(r);
    auto b = target.row_span(r);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      ab += a[j] * b[j];
      aa += a[j] * a[j];
      bb += b[j] * b[j];
    }
    if (aa == 0.0 || bb == 0.0) continue;
    const double na = std::sqrt(aa), nb = std::sqrt(bb);
    const double cosv = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
    out.loss += (1.0 - cosv) * inv_n;
    auto g = out.seed.row_span(r);
    for (std::size_t j = 0; j < a.size(); ++j) {
      g[j] = -(b[j] / (na * nb) - cosv * a[j] / aa) * inv_n;
    }
  }
  return out;
}

Tensor guided_velocity(const Tensor& v_cond, const Tensor& v_uncond, const GuidanceSpec& g) {
  require_same_shape(v_cond, v_uncond, "guided_velocity");
  if (g.w_cfg == 1.0) return v_cond;
  Tensor out = v_cond;
  for (std::size_t r = 0; r < v_cond.rows(); ++r) {
    auto c = v_cond.row_span(r);
    auto u = v_uncond.row_span(r);
    double sq = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) sq += (c[j] - u[j]) * (c[j] - u[j]);
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) continue;
    const double k = g.normalize ? (g.w_cfg - 1.0) * g.eta / norm : g.w_cfg - 1.0;
    auto o = out.row_span(r);
    for (std::size_t j = 0; j < c.size(); ++j) o[j] += k * (c[j] - u[j]);
  }
  return out;
}

std::string to_string(Branch b) {
  switch (b) {
    case Branch::kFm: return "fm";
    case Branch::kCm: return "cm";
    case Branch::kN2n: return "n2n";
  }
  return "?";
}

LossTarget fm_target(const VelocityNet& net, const Tensor& x_t, std::span<const double> t,
                     std::span<const int> labels, const Tensor& v_target) {
  require_same_shape(x_t, v_target, "fm_target");
  LossTarget lt;
  lt.branch = Branch::kFm;
  lt.prediction = net.forward_taped(x_t, make_cond(t, t, labels));
  lt.target = v_target;
  lt.diagnostics.target_norm = mean_row_norm(v_target);
  return lt;
}

LossEval fm_loss_terms(const Tensor& prediction, const Tensor& target,
                       const AdaptiveDistance& dist, double beta_cos) {
  LossEval out = dist.with_grad(prediction, target);
  if (beta_cos != 0.0) {
    const LossEval cosv = cosine_loss(prediction, target);
    out.loss += beta_cos * cosv.loss;
    axpy(beta_cos, cosv.seed, out.seed);
  }
  return out;
}

double fm_loss(const VelocityNet& net, const Tensor& x_t, std::span<const double> t,
               std::span<const int> labels, const Tensor& v_target,
               const AdaptiveDistance& dist, double beta_cos) {
  require_same_shape(x_t, v_target, "fm_loss");
  const Tensor pred = net.eval(x_t, make_cond(t, t, labels));
  return fm_loss_terms(pred, v_target, dist, beta_cos).loss;
}

Tensor cm_residual(const Tensor& f_sg, const Tensor& v, const Tensor& df_dt,
                   std::span<const double> t) {
  require_same_shape(f_sg, v, "cm_residual");
  require_same_shape(f_sg, df_dt, "cm_residual");
  check_rows(f_sg, t.size(), "cm_residual");
  Tensor g = f_sg - v;
  for (std::size_t r = 0; r < t.size(); ++r) {
    auto gr = g.row_span(r);
    auto d = df_dt.row_span(r);
    for (std::size_t j = 0; j < gr.size(); ++j) gr[j] -= (1.0 - t[r]) * d[j];
  }
  return g;
}

Tensor n2n_residual(const Tensor& f_sg, const Tensor& v_r, const Tensor& v_t, const Tensor& df,
                    std::span<const double> r, std::span<const double> t, double lambda,
                    double gamma) {
  require_same_shape(f_sg, v_r, "n2n_residual");
  require_same_shape(f_sg, v_t, "n2n_residual");
  require_same_shape(f_sg, df, "n2n_residual");
  check_rows(f_sg, t.size(), "n2n_residual");
  check_rows(f_sg, r.size(), "n2n_residual");
  Tensor g(f_sg.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double h = t[i] - r[i];
    auto gi = g.row_span(i);
    auto f = f_sg.row_span(i);
    auto a = v_r.row_span(i);
    auto b = v_t.row_span(i);
    auto d = df.row_span(i);
    for (std::size_t j = 0; j < gi.size(); ++j) {
      gi[j] = (lambda + gamma) * f[j] - lambda * (a[j] + h * d[j]) - gamma * b[j];
    }
  }
  return g;
}

Tensor weighted_target(const Tensor& f_sg, const Tensor& g, std::span<const double> w) {
  require_same_shape(f_sg, g, "weighted_target");
  check_rows(f_sg, w.size(), "weighted_target");
  Tensor out = f_sg;
  for (std::size_t r = 0; r < w.size(); ++r) {
    auto o = out.row_span(r);
    auto gr = g.row_span(r);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] -= w[r] * gr[j];
  }
  return out;
}

namespace {

// Prediction must agree with the JVP primal: same weights, same inputs.
void check_primal_agreement(const Tensor& prediction, const Tensor& f_sg, const char* what) {
  const double gap = std::sqrt(squared_norm(prediction - f_sg));
  if (!(gap < 1e-9)) {
    throw NumericFault(what, "prediction and JVP primal differ by " + std::to_string(gap));
  }
}

// F_sg + (1 - t) dF/dt, the self-supervised velocity.
Tensor corrected_velocity(const Tensor& f_sg, const Tensor& df_dt, std::span<const double> t) {
  Tensor out = f_sg;
  for (std::size_t r = 0; r < t.size(); ++r) {
    auto o = out.row_span(r);
    auto d = df_dt.row_span(r);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += (1.0 - t[r]) * d[j];
  }
  return out;
}

}  // namespace

LossTarget cm_target(const VelocityNet& net, const Tensor& x_t, std::span<const double> t,
                     std::span<const int> labels, const Tensor& v, const WeightFn& weights) {
  require_same_shape(x_t, v, "cm_target");
  check_rows(x_t, t.size(), "cm_target");
  const std::vector<double> ones(t.size(), 1.0), zeros(t.size(), 0.0);
  const Conditioning cond = make_cond(t, ones, labels);
  const DualValue jv = net.jvp(x_t, cond, v, ones, zeros);

  LossTarget lt;
  lt.branch = Branch::kCm;
  lt.prediction = net.forward_taped(x_t, cond);
  check_primal_agreement(lt.prediction.output, jv.primal, "cm_target");

  const Tensor g = cm_residual(jv.primal, v, jv.tangent, t);
  std::vector<double> w(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) w[r] = weights.w1(t[r]);
  lt.target = weighted_target(jv.primal, g, w);

  auto& d = lt.diagnostics;
  d.target_norm = mean_row_norm(lt.target);
  d.tangent_norm = mean_row_norm(jv.tangent);
  d.term_sup = mean_sq_distance(jv.primal, v);
  d.term_self = mean_sq_distance(jv.primal, corrected_velocity(jv.primal, jv.tangent, t));
  return lt;
}

LossTarget n2n_target(const VelocityNet& net, const Tensor& x_r, std::span<const double> r,
                      std::span<const double> t, std::span<const int> labels, const Tensor& v_r,
                      const Tensor& v_t, const N2nCoefficients& coef, const WeightFn& weights) {
  require_same_shape(x_r, v_r, "n2n_target");
  require_same_shape(x_r, v_t, "n2n_target");
  check_rows(x_r, t.size(), "n2n_target");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > r[i])) throw DomainError("n2n_target requires t > r");
  }
  if (!(coef.lambda + coef.gamma > 0.0)) throw DomainError("n2n_target requires lambda + gamma > 0");
  const std::vector<double> dt(t.size(), coef.lambda), ds(t.size(), -coef.gamma);
  const Conditioning cond = make_cond(r, t, labels);
  Tensor dx = v_r;
  for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= coef.lambda;
  const DualValue jv = net.jvp(x_r, cond, dx, dt, ds);

  LossTarget lt;
  lt.branch = Branch::kN2n;
  lt.prediction = net.forward_taped(x_r, cond);
  check_primal_agreement(lt.prediction.output, jv.primal, "n2n_target");

  const Tensor g = n2n_residual(jv.primal, v_r, v_t, jv.tangent, r, t, coef.lambda, coef.gamma);
  std::vector<double> w(t.size());
  // g carries F_sg with coefficient lambda + gamma; dividing by it makes
  // w2 = 1 the pure target, as w1 = 1 is for the consistency branch.
  const double norm = coef.lambda + coef.gamma;
  for (std::size_t i = 0; i < t.size(); ++i) w[i] = weights.w2(r[i], t[i]) / norm;
  lt.target = weighted_target(jv.primal, g, w);
  lt.diagnostics.target_norm = mean_row_norm(lt.target);
  lt.diagnostics.tangent_norm = mean_row_norm(jv.tangent);
  return lt;
}

InstabilityTerms instability_probe(const VelocityNet& net, const Tensor& x_t,
                                   std::span<const double> t, std::span<const int> labels,
                                   const Tensor& v) {
  require_same_shape(x_t, v, "instability_probe");
  check_rows(x_t, t.size(), "instability_probe");
  const std::vector<double> ones(t.size(), 1.0), zeros(t.size(), 0.0);
  const DualValue jv = net.jvp(x_t, make_cond(t, ones, labels), v, ones, zeros);
  return {mean_sq_distance(jv.primal, v),
          mean_sq_distance(jv.primal, corrected_velocity(jv.primal, jv.tangent, t))};
}

}  // namespace fmlab
