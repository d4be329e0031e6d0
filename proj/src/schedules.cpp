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

#include "fmlab/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

constexpr double kTimeEps = 1e-5;
constexpr double kMinWeight = 1e-4;

double clip_weight(double w) { return std::clamp(w, kMinWeight, 1.0); }

double fit_branch(double t, TimeBranch branch) {
  switch (branch) {
    case TimeBranch::kCm: return std::clamp(t, 0.0, 1.0 - kTimeEps);
    case TimeBranch::kN2nRight: return std::clamp(t, kTimeEps, 1.0);
    case TimeBranch::kFm: return std::clamp(t, 0.0, 1.0);
  }
  return t;
}

}  // namespace

Tensor interpolate(const Tensor& z, const Tensor& x1, double t) {
  require_same_shape(z, x1, "interpolate");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolate: t outside [0,1]");
  if (t == 0.0) return z;
  if (t == 1.0) return x1;
  Tensor out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (1.0 - t) * z[i] + t * x1[i];
  return out;
}

TimestepKind parse_timestep_kind(const std::string& s) {
  if (s == "uniform-N-seg" || s == "uniform-seg") return TimestepKind::kUniformSegments;
  if (s == "lognorm" || s == "log-norm") return TimestepKind::kLogNorm;
  if (s == "arctan-norm") return TimestepKind::kArctanNorm;
  throw FormatError("unknown timestep schedule '" + s + "'");
}

std::string to_string(TimestepKind k) {
  switch (k) {
    case TimestepKind::kUniformSegments: return "uniform-N-seg";
    case TimestepKind::kLogNorm: return "lognorm";
    case TimestepKind::kArctanNorm: return "arctan-norm";
  }
  return "?";
}

double sample_t(const TimestepSampler& sampler, Rng& rng, TimeBranch branch) {
  if (branch == TimeBranch::kFm) return rng.uniform();
  switch (sampler.kind) {
    case TimestepKind::kUniformSegments: {
      if (sampler.segments < 1) throw DomainError("timestep sampler needs at least one segment");
      const auto n = static_cast<std::size_t>(sampler.segments);
      // cm: {0, ..., N-1}/N keeps t < s = 1. n2n-right: {1, ..., N}/N keeps t > r = 0.
      const std::size_t i = rng.index(n) + (branch == TimeBranch::kN2nRight ? 1 : 0);
      return static_cast<double>(i) / static_cast<double>(n);
    }
    case TimestepKind::kLogNorm: {
      const double u = sampler.mean + sampler.stddev * rng.normal();
      return fit_branch(1.0 / (1.0 + std::exp(-u)), branch);
    }
    case TimestepKind::kArctanNorm: {
      // Noise level sigma = exp(u) mapped to time through 1 - (2/pi) atan(sigma).
      const double u = sampler.mean + sampler.stddev * rng.normal();
      return fit_branch(1.0 - 2.0 / std::numbers::pi * std::atan(std::exp(u)), branch);
    }
  }
  return 0.0;
}

double WeightFn::w1(double t) const {
  if (kind == WeightKind::kConstant) return 1.0;
  return clip_weight(kappa * (1.0 - t));
}

double WeightFn::w2(double r, double t) const {
  if (kind == WeightKind::kConstant) return 1.0;
  return clip_weight(kappa * (1.0 - (t - r)));
}

WeightKind parse_weight_kind(const std::string& s) {
  if (s == "constant") return WeightKind::kConstant;
  if (s == "linear") return WeightKind::kLinearDecay;
  throw FormatError("unknown weight function '" + s + "'");
}

}  // namespace fmlab
