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

#ifndef FMLAB_SCHEDULES_HPP_
#define FMLAB_SCHEDULES_HPP_

#include <string>

#include "fmlab/rng.hpp"
#include "fmlab/tensor.hpp"

namespace fmlab {

// Linear (OT) path: x_t = (1 - t) z + t x1, alpha(t) = t, sigma(t) = 1 - t.
struct Interpolant {
  static double alpha(double t) { return t; }
  static double sigma(double t) { return 1.0 - t; }
  static constexpr double alpha_dot = 1.0;
  static constexpr double sigma_dot = -1.0;
};

// (1 - t) z + t x1. Endpoints return copies of z and x1 exactly.
Tensor interpolate(const Tensor& z, const Tensor& x1, double t);

enum class TimestepKind { kUniformSegments, kLogNorm, kArctanNorm };
enum class TimeBranch { kCm, kN2nRight, kFm };

TimestepKind parse_timestep_kind(const std::string& s);
std::string to_string(TimestepKind k);

struct TimestepSampler {
  TimestepKind kind = TimestepKind::kUniformSegments;
  int segments = 8;
  // Location/scale of the underlying normal draw for the lognorm and
  // arctan-norm kinds.
  double mean = -0.4;
  double stddev = 1.0;
};

// Draws a training time for the given branch. The cm branch always returns
// t < 1, the n2n-right branch t > 0. The fm branch is continuous U(0,1)
// regardless of kind.
double sample_t(const TimestepSampler& sampler, Rng& rng, TimeBranch branch);

enum class WeightKind { kConstant, kLinearDecay };

// Loss weights w1(t) for the consistency branch and w2(r,t) for the
// noise-to-noisy branch. Always in (0, 1].
struct WeightFn {
  WeightKind kind = WeightKind::kConstant;
  double kappa = 1.0;

  double w1(double t) const;
  double w2(double r, double t) const;
};

WeightKind parse_weight_kind(const std::string& s);

}  // namespace fmlab

#endif  // FMLAB_SCHEDULES_HPP_
