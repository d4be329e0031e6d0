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

// Two-phase distillation loop: consistency plus flow matching every step, a
// second noise-to-noisy plus flow-matching update every freq steps.

#ifndef FMLAB_TRAINER_HPP_
#define FMLAB_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fmlab/checkpoint.hpp"
#include "fmlab/config.hpp"
#include "fmlab/data_oracle.hpp"
#include "fmlab/objectives.hpp"
#include "fmlab/rng.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

class AdamW {
 public:
  AdamW() = default;
  AdamW(const std::vector<Tensor>& like, double lr, double beta1, double beta2,
        double weight_decay, double eps = 1e-8);

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);
  std::uint64_t steps() const { return t_; }

 private:
  std::vector<Tensor> m_, v_;
  double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.95, wd_ = 0.0, eps_ = 1e-8;
  std::uint64_t t_ = 0;
};

struct Batch {
  Tensor z;                 // noise
  Tensor z_ref;             // data
  std::vector<int> labels;  // kNullClass rows are unconditional
  std::vector<double> t;
  Tensor z_t;
  Tensor v_t;  // guided teacher velocity, or z_ref - z from scratch
};

// Guided teacher velocity at (x, t). Rows labelled kNullClass use the
// unconditional output directly.
Tensor teacher_velocity(const VelocityNet& teacher, const Tensor& x, std::span<const double> t,
                        const std::vector<int>& labels, const GuidanceSpec& guidance);

// Draws noise, data and per-row times for one branch and forms z_t and v_t.
// teacher may be null only in from-scratch mode.
Batch prepare_batch(const VelocityNet* teacher, const ToyDataset& data, Rng& rng,
                    const TrainConfig& config, TimeBranch branch);

// Called with the assembled gradients of every update, before the optimizer.
using GradHook = std::function<void(std::uint64_t step, int phase, std::vector<Tensor>& grads)>;

struct TrainState {
  TrainConfig config;
  ToyDataset dataset;
  VelocityNet net;
  EmaShadow ema;
  AdamW optimizer;
  std::optional<VelocityNet> teacher;
  bool s_path_frozen = false;
  std::uint64_t iters = 0;
  std::uint64_t updates = 0;
  int consecutive_faults = 0;
  std::uint64_t total_faults = 0;
  GradHook grad_hook;
};

// A fresh state. Distillation copies the teacher weights and zeroes the s
// pathway; from-scratch runs start from a seeded initialization.
TrainState make_train_state(const TrainConfig& config,
                            std::optional<VelocityNet> teacher = std::nullopt);
// Restores online and EMA weights and the step counter from a checkpoint.
TrainState resume_train_state(const TrainConfig& config, const Checkpoint& ck,
                              std::optional<VelocityNet> teacher = std::nullopt);

struct StepReport {
  std::uint64_t step = 0;
  double loss_fm = std::numeric_limits<double>::quiet_NaN();
  double loss_cm = std::numeric_limits<double>::quiet_NaN();
  double loss_n2n = std::numeric_limits<double>::quiet_NaN();
  double loss_fm_n2n = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  double term_sup = std::numeric_limits<double>::quiet_NaN();
  double term_self = std::numeric_limits<double>::quiet_NaN();
  double ema_gap = 0.0;
  int updates = 0;
  bool faulted = false;
  std::string fault;
};

// One iteration. A non-finite loss, gradient or weight restores the
// pre-step weights, optimizer and EMA; TrainingAborted is thrown once
// config.fault_threshold consecutive iterations have faulted.
StepReport train_step(TrainState& state);

Checkpoint make_checkpoint(const TrainState& state);

struct RunOptions {
  std::string log_path;         // metric CSV; empty disables
  std::string checkpoint_path;  // final checkpoint; empty disables
  // Periodic checkpoints go to checkpoint_path + ".step<N>".
  std::function<void(const StepReport&)> on_step;
};

struct RunResult {
  TrainState state;
  std::vector<StepReport> log;
};

RunResult run_training(TrainState state, const RunOptions& options = {});
RunResult run_training(const TrainConfig& config, std::optional<VelocityNet> teacher,
                       const RunOptions& options = {});

inline constexpr const char* kMetricLogHeader =
    "step,loss_fm,loss_cm,loss_n2n,grad_norm,term_sup,term_self,ema_gap";
std::string metric_log_row(const StepReport& r);

}  // namespace fmlab

#endif  // FMLAB_TRAINER_HPP_
