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

// Euler, consistency (predict and renoise) and mixed few-step samplers.

#ifndef FMLAB_SAMPLERS_HPP_
#define FMLAB_SAMPLERS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/rng.hpp"
#include "fmlab/tensor.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

enum class SamplerKind { kEuler, kCm, kMix };
SamplerKind parse_sampler_kind(const std::string& s);
std::string to_string(SamplerKind k);

// Velocity used by the deterministic part of the mix sampler.
enum class MixStep { kFlowMap, kInstantaneous };

struct TimeGrid {
  std::vector<double> times;  // 0 = t_0 < ... < t_K = 1
  bool on_training_grid = false;
};

// Uniform grid with nfe steps. It lies on the training grid i / segments
// exactly when nfe divides segments.
TimeGrid make_grid(int nfe, int segments);
void validate_grid(const std::vector<double>& times);

struct SamplerSpec {
  SamplerKind kind = SamplerKind::kCm;
  int nfe = 1;
  std::vector<double> grid;  // empty: make_grid(nfe, segments)
  int segments = 8;
  // 0: one step, the noise-to-noisy map f(z, 0, t_1). Later flow map
  // steps start at r > 0, which training never visits.
  int mix_k = 0;
  MixStep mix_step = MixStep::kFlowMap;
  std::uint64_t seed = 0;
  bool keep_snapshots = false;
};

// Grid and split after defaults are applied and checked.
struct ResolvedSpec {
  SamplerSpec spec;
  TimeGrid grid;
  int mix_k = 0;
};
ResolvedSpec resolve(const SamplerSpec& spec);

// Low-level samplers starting from given noise. Renoise draws come from
// renoise_rng. snapshots, if non-null, receives the state at each grid time.
Tensor euler_from(const VelocityNet& net, const std::vector<double>& grid, const Tensor& x0,
                  const std::vector<int>& labels, std::vector<Tensor>* snapshots = nullptr);
Tensor cm_from(const VelocityNet& net, const std::vector<double>& grid, const Tensor& x0,
               const std::vector<int>& labels, Rng& renoise_rng,
               std::vector<Tensor>* snapshots = nullptr);
// k deterministic steps, then the cm paradigm from t_k. k may be 0 here.
Tensor mix_from(const VelocityNet& net, const std::vector<double>& grid, int k, MixStep step,
                const Tensor& x0, const std::vector<int>& labels, Rng& renoise_rng,
                std::vector<Tensor>* snapshots = nullptr);

struct SampleRun {
  ResolvedSpec spec;
  std::vector<int> labels;
  Tensor samples;
  std::vector<Tensor> snapshots;
};

// Draws labels.size() samples. Initial noise and renoise use separate
// streams of spec.seed.
SampleRun run_sampler(const VelocityNet& net, const SamplerSpec& spec,
                      const std::vector<int>& labels);

// CSV with header dim0,...,class.
void write_samples_csv(const std::string& path, const SampleRun& run);
Tensor read_samples_csv(const std::string& path, std::vector<int>* labels = nullptr);
// Plain key = value metadata next to the sample file.
void write_sample_metadata(const std::string& path, const SampleRun& run,
                           const std::string& checkpoint_digest);

}  // namespace fmlab

#endif  // FMLAB_SAMPLERS_HPP_
