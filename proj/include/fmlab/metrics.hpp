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

// Two-sample distances between point clouds and gradient-norm diagnostics.

#ifndef FMLAB_METRICS_HPP_
#define FMLAB_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>

#include "fmlab/rng.hpp"
#include "fmlab/tensor.hpp"

namespace fmlab {

struct FrechetResult {
  double value = 0.0;
  bool ridge_applied = false;  // a covariance was singular and got 1e-8 I
};

// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2) on the
// fitted means and (unbiased) covariances.
FrechetResult frechet_gaussian(const Tensor& a, const Tensor& b);

// V-statistic 2 E|X - Y| - E|X - X'| - E|Y - Y'|.
double energy_distance(const Tensor& a, const Tensor& b);

// Exact 1-D W2 between two empirical distributions of any sizes.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

// Mean over random unit directions of the 1-D W2 of the projected clouds.
double sliced_w2(const Tensor& a, const Tensor& b, int n_projections, Rng& rng);

struct GradNormSummary {
  double max = 0.0;
  double final = 0.0;
  bool diverged = false;
  long first_divergence = -1;  // index of the first flagged entry
};

// A value counts as divergent when it exceeds 100x the median of the
// previous 500 finite values. Non-finite entries are skipped.
GradNormSummary grad_norm_series(std::span<const double> norms, std::size_t window = 500,
                                 double factor = 100.0);

struct MetricReport {
  double frechet_gaussian = 0.0;
  double energy_distance = 0.0;
  double sliced_w2 = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool ridge_applied = false;
};

struct MetricOptions {
  int n_projections = 256;
  // Energy distance is quadratic in the cloud size; it uses at most this
  // many leading rows of each cloud.
  std::size_t energy_max_points = 4096;
};

MetricReport compare_clouds(const Tensor& samples, const Tensor& reference, std::uint64_t seed,
                            const MetricOptions& opts = {});

// Appends "label,frechet_gaussian,energy_distance,sliced_w2,n_samples,seed",
// writing the header when the file is new or empty.
void append_report_csv(const std::string& path, const std::string& label,
                       const MetricReport& report);

}  // namespace fmlab

#endif  // FMLAB_METRICS_HPP_
