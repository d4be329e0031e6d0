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

// Loss distances, guidance and the stop-gradient target builders for the
// flow-matching, consistency and noise-to-noisy branches.

#ifndef FMLAB_OBJECTIVES_HPP_
#define FMLAB_OBJECTIVES_HPP_

#include <span>
#include <string>
#include <vector>

#include "fmlab/schedules.hpp"
#include "fmlab/tensor.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

// Loss value and its gradient with respect to the prediction, ready to be
// used as the backward seed.
struct LossEval {
  double loss = 0.0;
  Tensor seed;
};

// Per-row ||a - b||^2 / (||a - b||^2 + c^2)^(1 - p), averaged over rows. The
// denominator is treated as a constant when differentiating.
struct AdaptiveDistance {
  double p = 0.5;
  double c = 1e-3;

  double row(double squared_norm) const;
  double operator()(const Tensor& a, const Tensor& b) const;
  LossEval with_grad(const Tensor& prediction, const Tensor& target) const;
};

// Mean over rows of 1 - cos(a, b). Rows where either side is zero
// contribute nothing.
LossEval cosine_loss(const Tensor& prediction, const Tensor& target);

struct GuidanceSpec {
  double w_cfg = 1.0;
  double eta = 1.0;
  bool normalize = true;
};

Tensor guided_velocity(const Tensor& v_cond, const Tensor& v_uncond, const GuidanceSpec& g);

enum class Branch { kFm, kCm, kN2n };
std::string to_string(Branch b);

struct TargetDiagnostics {
  double target_norm = 0.0;   // mean row norm of the target
  double tangent_norm = 0.0;  // mean row norm of the JVP output
  double term_sup = 0.0;      // mean ||F - v||^2 (cm only)
  double term_self = 0.0;     // mean ||F - (F_sg + (1 - t) dF/dt)||^2 (cm only)
};

// A gradient-tracked prediction and a detached target. The target tensor is
// never on the tape.
struct LossTarget {
  Branch branch = Branch::kFm;
  TapedForward prediction;
  Tensor target;
  TargetDiagnostics diagnostics;
};

// Flow-matching pair: prediction F(x_t, t, t) against v_target.
LossTarget fm_target(const VelocityNet& net, const Tensor& x_t, std::span<const double> t,
                     std::span<const int> labels, const Tensor& v_target);

// adaptive_distance(F, v) + beta_cos * (1 - cos(F, v)).
LossEval fm_loss_terms(const Tensor& prediction, const Tensor& target,
                       const AdaptiveDistance& dist, double beta_cos);
double fm_loss(const VelocityNet& net, const Tensor& x_t, std::span<const double> t,
               std::span<const int> labels, const Tensor& v_target,
               const AdaptiveDistance& dist, double beta_cos);

// g = F_sg - v - (1 - t) dF/dt, per row.
Tensor cm_residual(const Tensor& f_sg, const Tensor& v, const Tensor& df_dt,
                   std::span<const double> t);
// g = (lambda + gamma) F_sg - lambda (v_r + (t - r) dF) - gamma v_t, per row.
Tensor n2n_residual(const Tensor& f_sg, const Tensor& v_r, const Tensor& v_t, const Tensor& df,
                    std::span<const double> r, std::span<const double> t, double lambda,
                    double gamma);
// F_sg - w_i g_i per row.
Tensor weighted_target(const Tensor& f_sg, const Tensor& g, std::span<const double> w);

// Consistency target at (x_t, t, s = 1). The JVP runs with the current
// weights held constant, tangent (v, 1, 0).
LossTarget cm_target(const VelocityNet& net, const Tensor& x_t, std::span<const double> t,
                     std::span<const int> labels, const Tensor& v, const WeightFn& weights);

struct N2nCoefficients {
  double lambda = 1.0;
  double gamma = 1.0;
};

// Noise-to-noisy target at (x_r, r, t) with tangent (lambda v_r, lambda,
// -gamma). v_t is the right-endpoint velocity supplied by the caller.
LossTarget n2n_target(const VelocityNet& net, const Tensor& x_r, std::span<const double> r,
                      std::span<const double> t, std::span<const int> labels, const Tensor& v_r,
                      const Tensor& v_t, const N2nCoefficients& coef, const WeightFn& weights);

struct InstabilityTerms {
  double term_sup = 0.0;
  double term_self = 0.0;
};

// The supervised and self-supervised parts of the consistency objective at
// (x_t, t, s = 1).
InstabilityTerms instability_probe(const VelocityNet& net, const Tensor& x_t,
                                   std::span<const double> t, std::span<const int> labels,
                                   const Tensor& v);

}  // namespace fmlab

#endif  // FMLAB_OBJECTIVES_HPP_
