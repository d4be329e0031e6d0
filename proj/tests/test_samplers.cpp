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

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "fmlab/data_oracle.hpp"
#include "fmlab/errors.hpp"
#include "fmlab/samplers.hpp"
#include "fmlab/schedules.hpp"
#include "test_util.hpp"

namespace fmlab {
namespace {

using testing::max_abs_diff;
using testing::random_net;
using testing::small_arch;

VelocityNet constant_net(double cx, double cy) {
  VelocityNet net(small_arch(), 3);
  net.params().back()[0] = cx;
  net.params().back()[1] = cy;
  return net;
}

TEST(Grid, UniformAndTrainingGridFlag) {
  const TimeGrid g = make_grid(4, 8);
  EXPECT_EQ(g.times, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_TRUE(g.on_training_grid);
  EXPECT_FALSE(make_grid(3, 8).on_training_grid);
  EXPECT_EQ(make_grid(3, 8).times.back(), 1.0);
}

TEST(Grid, ValidationRejectsBadGrids) {
  EXPECT_THROW(validate_grid({0.0, 0.5}), DomainError);
  EXPECT_THROW(validate_grid({0.1, 1.0}), DomainError);
  EXPECT_THROW(validate_grid({0.0, 0.5, 0.5, 1.0}), DomainError);
  EXPECT_NO_THROW(validate_grid({0.0, 0.3, 1.0}));
}

TEST(Resolve, DefaultsAndErrors) {
  SamplerSpec s;
  s.kind = SamplerKind::kMix;
  s.nfe = 4;
  EXPECT_EQ(resolve(s).mix_k, 1);
  s.nfe = 5;
  EXPECT_EQ(resolve(s).mix_k, 1);
  s.mix_k = 5;
  EXPECT_THROW(resolve(s), DomainError);
  s.mix_k = 0;
  s.nfe = 1;
  EXPECT_THROW(resolve(s), DomainError);  // no room for a split
  SamplerSpec e;
  e.kind = SamplerKind::kEuler;
  e.nfe = 4;
  e.mix_k = 2;
  EXPECT_THROW(resolve(e), DomainError);
  e.mix_k = 0;
  e.grid = {0.0, 0.5, 1.0};
  EXPECT_THROW(resolve(e), DomainError);  // euler needs nfe == K
}

TEST(Euler, ConstantFieldOneStep) {
  const VelocityNet net = constant_net(1.0, -2.0);
  const Tensor x0({1, 2}, std::vector<double>{0.5, 0.5});
  EXPECT_EQ(euler_from(net, {0.0, 1.0}, x0, {kNullClass}), (Tensor({1, 2}, std::vector<double>{1.5, -1.5})));
}

TEST(Euler, SameSeedIsBitIdentical) {
  const VelocityNet net = random_net(small_arch(), 4);
  SamplerSpec s;
  s.kind = SamplerKind::kEuler;
  s.nfe = 16;
  s.seed = 9;
  const std::vector<int> labels(64, kNullClass);
  EXPECT_EQ(run_sampler(net, s, labels).samples, run_sampler(net, s, labels).samples);
  s.seed = 10;
  EXPECT_NE(run_sampler(net, s, labels).samples, run_sampler(net, {SamplerKind::kEuler, 16, {}, 8, 0, MixStep::kFlowMap, 9, false}, labels).samples);
}

TEST(Euler, ThousandStepsTrackReferenceIntegrator) {
  const VelocityNet net = random_net(small_arch(), 5, 0.3);
  Rng rng(6);
  const Tensor x0 = rng.normal_tensor(100, 2);
  const std::vector<int> labels(100, kNullClass);
  const Tensor e = euler_from(net, make_grid(1000, 1000).times, x0, labels);
  const Tensor ref = rk4_flow(net_field(net), x0, 0.0, 1.0, 2000);
  double gap = 0.0;
  for (double v : row_squared_norms(e - ref)) gap += std::sqrt(v);
  EXPECT_LT(gap / 100.0, 1e-3);
}

TEST(Cm, SingleStepEqualsFlowMap) {
  const VelocityNet net = random_net(small_arch(), 7);
  SamplerSpec s;
  s.kind = SamplerKind::kCm;
  s.nfe = 1;
  s.seed = 2;
  const std::vector<int> labels(50, kNullClass);
  const SampleRun run = run_sampler(net, s, labels);
  Rng noise(2, 1);
  const Tensor x0 = noise.normal_tensor(50, 2);
  EXPECT_EQ(run.samples, flow_map(net, x0, 0.0, 1.0));
}

TEST(Cm, RenoiseArithmetic) {
  EXPECT_EQ(interpolate(Tensor({1, 2}), Tensor({1, 2}, std::vector<double>{2.0, 4.0}), 0.5),
            (Tensor({1, 2}, std::vector<double>{1.0, 2.0})));
}

// A net whose flow map to 1 returns a fixed point c: x + (1 - t) F = c. With
// perfect predictions the renoised state after each step sits on the
// interpolant between fresh noise and c.
TEST(Cm, FreshNoiseEachStep) {
  const VelocityNet net = random_net(small_arch(), 8);
  const std::vector<int> labels(2000, kNullClass);
  Rng noise(1), renoise(2);
  const Tensor x0 = noise.normal_tensor(2000, 2);
  std::vector<Tensor> snaps;
  cm_from(net, {0.0, 0.5, 1.0}, x0, labels, renoise, &snaps);
  ASSERT_EQ(snaps.size(), 3u);
  // The state at t = 0.5 is 0.5 z_new + 0.5 x_hat, and z_new is independent of x0.
  const Tensor xhat = flow_map(net, x0, 0.0, 1.0);
  Rng replay(2);
  const Tensor z_new = replay.normal_tensor(2000, 2);
  EXPECT_LT(max_abs_diff(snaps[1], interpolate(z_new, xhat, 0.5)), 1e-15);
  EXPECT_GT(max_abs_diff(z_new, x0), 0.1);
}

TEST(Mix, UnrollsFlowMapSteps) {
  const VelocityNet net = random_net(small_arch(), 9);
  Rng noise(3), renoise(4);
  const Tensor x0 = noise.normal_tensor(10, 2);
  const std::vector<int> labels(10, kNullClass);
  const Tensor out = mix_from(net, {0.0, 0.5, 1.0}, 1, MixStep::kFlowMap, x0, labels, renoise);
  EXPECT_EQ(out, flow_map(net, flow_map(net, x0, 0.0, 0.5), 0.5, 1.0));
}

TEST(Mix, FullyDeterministicWhenKIsNfeMinusOne) {
  const VelocityNet net = random_net(small_arch(), 10);
  Rng noise(3);
  const Tensor x0 = noise.normal_tensor(10, 2);
  const std::vector<int> labels(10, kNullClass);
  Rng r1(1), r2(99);
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  EXPECT_EQ(mix_from(net, grid, 3, MixStep::kFlowMap, x0, labels, r1),
            mix_from(net, grid, 3, MixStep::kFlowMap, x0, labels, r2));
}

TEST(Mix, KZeroDegeneratesToCm) {
  const VelocityNet net = random_net(small_arch(), 11);
  Rng noise(3);
  const Tensor x0 = noise.normal_tensor(10, 2);
  const std::vector<int> labels(10, kNullClass);
  const std::vector<double> grid{0.0, 0.25, 0.5, 1.0};
  Rng r1(5), r2(5);
  EXPECT_EQ(mix_from(net, grid, 0, MixStep::kFlowMap, x0, labels, r1), cm_from(net, grid, x0, labels, r2));
}

TEST(Mix, InstantaneousStepUsesDiagonalVelocity) {
  const VelocityNet net = random_net(small_arch(), 12);
  Rng noise(3), r1(1);
  const Tensor x0 = noise.normal_tensor(10, 2);
  const std::vector<int> labels(10, kNullClass);
  const Tensor out = mix_from(net, {0.0, 0.5, 1.0}, 1, MixStep::kInstantaneous, x0, labels, r1);
  Tensor x = x0;
  axpy(0.5, net.eval(x0, 0.0, 0.0), x);
  EXPECT_EQ(out, flow_map(net, x, 0.5, 1.0));
}

TEST(Renoise, MarginalMatchesInterpolant) {
  const ToyDataset ds = make_two_gaussians();
  Rng rng(13);
  const std::size_t n = 50000;
  const Tensor data = sample_data(ds, n, rng).points;
  const double t = 0.3;
  const Tensor x = interpolate(rng.normal_tensor(n, 2), data, t);
  // Marginal mean t E[x1]; variance per axis (1-t)^2 + t^2 Var[x1].
  const double ex[2] = {0.4, 0.2};
  const double ex2[2] = {0.25 + 0.4 * 4 + 0.6 * 4, 0.25 + 0.4 * 1 + 0.6 * 1};
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x.at(i, j);
    m /= n;
    for (std::size_t i = 0; i < n; ++i) v += (x.at(i, j) - m) * (x.at(i, j) - m);
    v /= n - 1;
    const double var = (1 - t) * (1 - t) + t * t * (ex2[j] - ex[j] * ex[j]);
    EXPECT_NEAR(m, t * ex[j], 4 * std::sqrt(var / n));
    EXPECT_NEAR(v, var, 0.03 * var);
  }
}

TEST(Run, SampleCountAndSnapshots) {
  const VelocityNet net = random_net(small_arch(2), 14);
  SamplerSpec s;
  s.kind = SamplerKind::kMix;
  s.nfe = 4;
  s.keep_snapshots = true;
  const std::vector<int> labels{0, 1, 1, kNullClass, 0};
  const SampleRun run = run_sampler(net, s, labels);
  EXPECT_EQ(run.samples.rows(), 5u);
  EXPECT_EQ(run.snapshots.size(), 5u);
  EXPECT_EQ(run.labels, labels);
}

TEST(Csv, RoundTrip) {
  const VelocityNet net = random_net(small_arch(2), 15);
  SamplerSpec s;
  s.kind = SamplerKind::kEuler;
  s.nfe = 3;
  const SampleRun run = run_sampler(net, s, {0, 1, kNullClass});
  const auto dir = std::filesystem::temp_directory_path();
  const std::string path = (dir / "fmlab_samples.csv").string();
  write_samples_csv(path, run);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "dim0,dim1,class");
  std::vector<int> labels;
  const Tensor back = read_samples_csv(path, &labels);
  EXPECT_EQ(back, run.samples);
  EXPECT_EQ(labels, run.labels);
  const std::string meta = (dir / "fmlab_samples.meta").string();
  write_sample_metadata(meta, run, "abc123");
  std::ifstream m(meta);
  const std::string text((std::istreambuf_iterator<char>(m)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("checkpoint_digest = abc123"), std::string::npos);
  EXPECT_NE(text.find("on_training_grid = false"), std::string::npos);
  std::filesystem::remove(path);
  std::filesystem::remove(meta);
}

TEST(Parse, SamplerKinds) {
  for (SamplerKind k : {SamplerKind::kEuler, SamplerKind::kCm, SamplerKind::kMix})
    EXPECT_EQ(parse_sampler_kind(to_string(k)), k);
  EXPECT_THROW(parse_sampler_kind("heun"), FormatError);
}

}  // namespace
}  // namespace fmlab
