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

// Toy datasets with known structure and the ground-truth machinery used as
// test oracles: closed-form and Monte-Carlo marginal velocities under the
// linear path, and fixed-step reference integrators for the probability-flow
// ODE.

#ifndef FMLAB_DATA_ORACLE_HPP_
#define FMLAB_DATA_ORACLE_HPP_

#include <functional>
#include <string>
#include <vector>

#include "fmlab/rng.hpp"
#include "fmlab/tensor.hpp"
#include "fmlab/velocity_net.hpp"

namespace fmlab {

enum class DatasetKind { kGaussianMixture, kCheckerboard, kTwoMoons };

struct GaussianComponent {
  std::vector<double> mean;
  double stddev = 1.0;
  double weight = 1.0;
};

struct ToyDataset {
  DatasetKind kind = DatasetKind::kGaussianMixture;
  std::size_t dim = 2;
  std::vector<GaussianComponent> components;  // gaussian-mixture
  int grid = 4;                               // checkerboard cells per side
  double extent = 2.0;                        // checkerboard covers [-extent, extent]^2
  double noise = 0.05;                        // two-moons jitter

  std::size_t n_classes() const;
  std::string name() const;
};

ToyDataset make_gaussian_mixture(std::vector<GaussianComponent> components);
ToyDataset make_two_gaussians();
ToyDataset make_checkerboard(int grid = 4, double extent = 2.0);
ToyDataset make_two_moons(double noise = 0.05);
ToyDataset make_dataset(const std::string& name);

struct DataBatch {
  Tensor points;            // [n, dim]
  std::vector<int> labels;  // class id per row
};

DataBatch sample_data(const ToyDataset& ds, std::size_t n, Rng& rng);
// Proportional allocation over strata (mixture components, checkerboard
// cells, moons); rows are grouped by stratum.
DataBatch sample_data_stratified(const ToyDataset& ds, std::size_t n, Rng& rng);

// E[x1 - x0 | x_t = x] under x_t = (1 - t) x0 + t x1 with x0 ~ N(0, I).
// Closed form for Gaussian mixtures, Monte Carlo otherwise. A label other
// than kNullClass conditions on that class.
Tensor oracle_velocity(const ToyDataset& ds, const Tensor& x, double t, int label = kNullClass);
Tensor oracle_velocity_closed_form(const ToyDataset& ds, const Tensor& x, double t,
                                   int label = kNullClass);

struct McEstimate {
  Tensor mean;
  Tensor standard_error;
};

// Self-normalised importance estimate of the marginal velocity from
// n_samples stratified data draws.
McEstimate mc_oracle_velocity(const ToyDataset& ds, const Tensor& x, double t,
                              std::size_t n_samples, Rng& rng, int label = kNullClass);

using VelocityField = std::function<Tensor(const Tensor& x, double t)>;

VelocityField oracle_field(const ToyDataset& ds, int label = kNullClass);
// Instantaneous field F(x, t, t) of a network.
VelocityField net_field(const VelocityNet& net, int label = kNullClass);

struct FlowResult {
  Tensor endpoint;
  double error_estimate = 0.0;  // mean row L2 change when halving the sub-steps
  bool flagged = false;         // error_estimate above tolerance
};

// Fixed-step Euler from t to s with a Richardson halving self-check.
FlowResult reference_flow(const VelocityField& field, const Tensor& x, double t, double s,
                          int steps = 1024, double tolerance = 5e-3);
// Classical fourth-order Runge-Kutta with fixed steps.
Tensor rk4_flow(const VelocityField& field, const Tensor& x, double t, double s, int steps);

}  // namespace fmlab

#endif  // FMLAB_DATA_ORACLE_HPP_
