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

#ifndef FMLAB_VELOCITY_NET_HPP_
#define FMLAB_VELOCITY_NET_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fmlab/graph.hpp"
#include "fmlab/tensor.hpp"

namespace fmlab {

// Label value selecting the reserved unconditional embedding row.
inline constexpr int kNullClass = -1;

struct NetArch {
  std::size_t dim_x = 2;
  std::size_t n_classes = 0;  // 0 = unconditional
  std::size_t width = 256;
  std::size_t depth = 4;      // hidden layers
  std::size_t n_freq = 16;    // sinusoidal frequencies per time input
  std::size_t class_dim = 8;

  std::size_t input_dim() const { return dim_x + 4 * n_freq + class_dim; }
  // First-layer weight rows fed by the s embedding.
  std::size_t s_rows_begin() const { return dim_x + 2 * n_freq; }
  std::size_t s_rows_end() const { return dim_x + 4 * n_freq; }
  std::vector<Shape> param_shapes() const;

  friend bool operator==(const NetArch&, const NetArch&) = default;
};

// Per-row conditioning for a batch: times t, s and a class label.
struct Conditioning {
  std::vector<double> t;
  std::vector<double> s;
  std::vector<int> labels;

  static Conditioning uniform(std::size_t rows, double t, double s, int label = kNullClass);
  std::size_t size() const { return t.size(); }
};

// Owned per-call inputs of the network graph. Heap-allocated so that tapes may
// reference them.
struct NetInputs {
  Tensor x, t, s, onehot;
  std::vector<const Tensor*> ptrs;
};

// Tape plus the inputs it references. The parameters are referenced in place:
// the network must outlive the result and stay unmodified until backward.
struct TapedForward {
  Tensor output;
  Tape tape;
  std::unique_ptr<NetInputs> inputs;
};

// Mean-velocity network F(x, t, s, class): an MLP with SiLU activations over
// [x, sin/cos(t*w), sin/cos(s*w), class embedding].
class VelocityNet {
 public:
  VelocityNet(NetArch arch, std::uint64_t seed);
  VelocityNet(NetArch arch, std::vector<Tensor> params);

  const NetArch& arch() const { return arch_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& params() { return params_; }
  std::size_t param_count() const;
  VelocityNet with_params(std::vector<Tensor> params) const;

  // Zeroes the first-layer rows reading the s embedding, so F ignores s.
  void zero_s_pathway();
  // Zeroes the entries of a gradient list that belong to the s pathway.
  void mask_s_pathway(std::vector<Tensor>& grads) const;

  Tensor eval(const Tensor& x, const Conditioning& cond) const;
  Tensor eval(const Tensor& x, double t, double s, int label = kNullClass) const;

  // Taped evaluation with the parameters as the differentiable inputs.
  TapedForward forward_taped(const Tensor& x, const Conditioning& cond) const;
  // Parameter gradients of seed . output for a tape from forward_taped().
  std::vector<Tensor> param_gradients(const Tape& tape, const Tensor& seed) const;

  // Directional derivative of F along (dx, dt, ds) with the weights held
  // constant. dt and ds are per-row scalars.
  DualValue jvp(const Tensor& x, const Conditioning& cond, const Tensor& dx,
                std::span<const double> dt, std::span<const double> ds) const;

  const Graph& graph() const { return *graph_; }

 private:
  std::unique_ptr<NetInputs> assemble_inputs(const Tensor& x, const Conditioning& cond) const;
  void validate(const Tensor& x, const Conditioning& cond) const;

  NetArch arch_;
  std::vector<Tensor> params_;
  std::shared_ptr<const Graph> graph_;
};

// x + (s - t) F(x, t, s). Rows with s == t return x unchanged.
Tensor flow_map(const VelocityNet& net, const Tensor& x, const Conditioning& cond);
Tensor flow_map(const VelocityNet& net, const Tensor& x, double t, double s,
                int label = kNullClass);

struct EmaShadow {
  std::vector<Tensor> shadow;
  double decay = 0.999;
};

EmaShadow make_ema(const VelocityNet& net, double decay);
// shadow <- decay * shadow + (1 - decay) * weights.
void ema_update(EmaShadow& ema, std::span<const Tensor> weights);
double params_distance(std::span<const Tensor> a, std::span<const Tensor> b);

}  // namespace fmlab

#endif  // FMLAB_VELOCITY_NET_HPP_
