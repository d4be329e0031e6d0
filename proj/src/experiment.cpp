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

#include "fmlab/experiment.hpp"

#include <cmath>
#include <vector>

#include "fmlab/rng.hpp"

namespace fmlab {

TrainConfig teacher_config(const std::string& dataset) {
  TrainConfig c;
  c.mode = TrainMode::kFromScratch;
  c.dataset = dataset;
  c.losses = LossFlags::parse("fm");
  c.lr = 1e-3;
  c.distance.p = 1.0;
  c.beta_cos = 0.0;
  c.total_steps = 20000;
  c.validate();
  return c;
}

TrainConfig student_config(const std::string& dataset, const LossFlags& losses) {
  TrainConfig c;
  c.mode = TrainMode::kDistill;
  c.dataset = dataset;
  c.losses = losses;
  c.validate();
  return c;
}

Tensor reference_cloud(const ToyDataset& ds, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_data(ds, n, rng).points;
}

MetricReport eval_sampler(const VelocityNet& net, const SamplerSpec& spec, const Tensor& reference,
                          const MetricOptions& opts) {
  const std::vector<int> labels(reference.rows(), kNullClass);
  const SampleRun run = run_sampler(net, spec, labels);
  return compare_clouds(run.samples, reference, spec.seed, opts);
}

double oracle_rmse(const VelocityNet& net, const ToyDataset& ds, std::size_t n_times,
                   std::size_t n_points, std::uint64_t seed) {
  Rng rng(seed);
  double se = 0.0;
  for (std::size_t i = 0; i < n_times; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n_times);
    const Tensor x1 = sample_data(ds, n_points, rng).points;
    const Tensor z = rng.normal_tensor(n_points, ds.dim);
    const Tensor xt = (1.0 - t) * z + t * x1;
    const Tensor u = oracle_velocity(ds, xt, t);
    se += squared_norm(net.eval(xt, t, t) - u);
  }
  return std::sqrt(se / static_cast<double>(n_times * n_points));
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace fmlab
