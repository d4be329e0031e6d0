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

// Shared recipes and evaluation helpers for the command line tool and the
// acceptance harness.

#ifndef FMLAB_EXPERIMENT_HPP_
#define FMLAB_EXPERIMENT_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fmlab/config.hpp"
#include "fmlab/data_oracle.hpp"
#include "fmlab/metrics.hpp"
#include "fmlab/samplers.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

// From-scratch flow matching with lr 1e-3, plain squared error and no
// cosine term, 20k steps.
TrainConfig teacher_config(const std::string& dataset = "two-gaussians");

// Distillation with the default objective weights and the given losses.
TrainConfig student_config(const std::string& dataset, const LossFlags& losses);

// n unconditional data points from a seeded stream.
Tensor reference_cloud(const ToyDataset& ds, std::size_t n, std::uint64_t seed);

// Draws reference.rows() unconditional samples and compares them with the
// reference cloud.
MetricReport eval_sampler(const VelocityNet& net, const SamplerSpec& spec, const Tensor& reference,
                          const MetricOptions& opts = {});

// Root mean squared error of F(x, t, t) against the oracle velocity, per
// point, at n_times midpoint times with n_points marginal samples each.
double oracle_rmse(const VelocityNet& net, const ToyDataset& ds, std::size_t n_times = 100,
                   std::size_t n_points = 100, std::uint64_t seed = 7);

// Hardware threads, at least 1.
unsigned default_jobs();

// Runs fn(i) for every i in [0, n) on up to jobs threads. Cells must not
// share mutable state. The first exception is rethrown after all workers
// finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::min<std::size_t>(jobs, n); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace fmlab

#endif  // FMLAB_EXPERIMENT_HPP_
