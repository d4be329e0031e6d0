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

#include "fmlab/velocity_net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fmlab/errors.hpp"
#include "fmlab/rng.hpp"

namespace fmlab {

namespace {

constexpr std::size_t kEvalChunk = 4096;

std::shared_ptr<const Graph> build_graph(const NetArch& a) {
  auto g = std::make_shared<Graph>();
  NodeId x = g->input("x", false);
  NodeId t = g->input("t", false);
  NodeId s = g->input("s", false);
  NodeId onehot = g->input("class", false);

  // Geometric frequencies from 1 to 8 rad per unit time. Higher bands make
  // dF/dt large enough to destabilize the consistency target.
  Tensor freqs({1, a.n_freq});
  for (std::size_t k = 0; k < a.n_freq; ++k) {
    const double frac = a.n_freq > 1 ? static_cast<double>(k) / static_cast<double>(a.n_freq - 1) : 0.0;
    freqs[k] = std::pow(2.0, 3.0 * frac);
  }
  NodeId w = g->constant(freqs, "freqs");

  NodeId table = g->input("class_table");
  NodeId at = g->matmul(t, w);
  NodeId as = g->matmul(s, w);
  NodeId h = g->concat_cols({x, g->sin(at), g->cos(at), g->sin(as), g->cos(as),
                             g->matmul(onehot, table)});
  for (std::size_t l = 0; l < a.depth; ++l) {
    NodeId W = g->input("W" + std::to_string(l));
    NodeId b = g->input("b" + std::to_string(l));
    h = g->silu(g->add_bias(g->matmul(h, W), b));
    g->set_label(h, "hidden" + std::to_string(l));
  }
  NodeId Wo = g->input("W_out");
  NodeId bo = g->input("b_out");
  NodeId out = g->add_bias(g->matmul(h, Wo), bo);
  g->set_label(out, "output");
  g->set_output(out);
  return g;
}

void check_time(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(name) + " = " + std::to_string(v) + " outside [0,1]");
  }
}

}  // namespace

std::vector<Shape> NetArch::param_shapes() const {
  std::vector<Shape> shapes;
  shapes.push_back({n_classes + 1, class_dim});
  std::size_t fan_in = input_dim();
  for (std::size_t l = 0; l < depth; ++l) {
    shapes.push_back({fan_in, width});
    shapes.push_back({1, width});
    fan_in = width;
  }
  shapes.push_back({fan_in, dim_x});
  shapes.push_back({1, dim_x});
  return shapes;
}

Conditioning Conditioning::uniform(std::size_t rows, double t, double s, int label) {
  return {std::vector<double>(rows, t), std::vector<double>(rows, s), std::vector<int>(rows, label)};
}

VelocityNet::VelocityNet(NetArch arch, std::uint64_t seed)
    : arch_(arch), graph_(build_graph(arch)) {
  Rng rng(seed, 0x11);
  const auto shapes = arch_.param_shapes();
  params_.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor p(shapes[i]);
    if (i == 0) {
      for (double& v : p.data()) v = rng.normal();
    } else if (i + 2 < shapes.size()) {
      // Hidden layers: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
      const std::size_t fan_in = (i % 2 == 1) ? shapes[i][0] : shapes[i - 1][0];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : p.data()) v = bound * (2.0 * rng.uniform() - 1.0);
    }
    // Output layer stays zero.
    params_.push_back(std::move(p));
  }
}

VelocityNet::VelocityNet(NetArch arch, std::vector<Tensor> params)
    : arch_(arch), params_(std::move(params)), graph_(build_graph(arch)) {
  const auto shapes = arch_.param_shapes();
  if (shapes.size() != params_.size()) {
    throw ShapeError("velocity net expects " + std::to_string(shapes.size()) +
                     " parameter tensors, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params_[i].shape() != shapes[i]) {
      throw ShapeError("parameter " + std::to_string(i) + " has shape " +
                       shape_string(params_[i].shape()) + ", expected " + shape_string(shapes[i]));
    }
  }
}

std::size_t VelocityNet::param_count() const {
  std::size_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

VelocityNet VelocityNet::with_params(std::vector<Tensor> params) const {
  VelocityNet out = *this;
  if (params.size() != params_.size()) throw ShapeError("with_params: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(params[i], params_[i], "with_params");
  out.params_ = std::move(params);
  return out;
}

void VelocityNet::zero_s_pathway() {
  Tensor& w0 = params_[1];
  for (std::size_t r = arch_.s_rows_begin(); r < arch_.s_rows_end(); ++r) {
    for (double& v : w0.row_span(r)) v = 0.0;
  }
}

void VelocityNet::mask_s_pathway(std::vector<Tensor>& grads) const {
  Tensor& g0 = grads.at(1);
  for (std::size_t r = arch_.s_rows_begin(); r < arch_.s_rows_end(); ++r) {
    for (double& v : g0.row_span(r)) v = 0.0;
  }
}

void VelocityNet::validate(const Tensor& x, const Conditioning& cond) const {
  if (x.rank() != 2 || x.cols() != arch_.dim_x) {
    throw ShapeError("velocity net: x has shape " + shape_string(x.shape()) + ", expected [B," +
                     std::to_string(arch_.dim_x) + "]");
  }
  const std::size_t b = x.rows();
  if (cond.t.size() != b || cond.s.size() != b || cond.labels.size() != b) {
    throw ShapeError("velocity net: conditioning length does not match batch of " +
                     std::to_string(b));
  }
  for (std::size_t i = 0; i < b; ++i) {
    check_time(cond.t[i], "t");
    check_time(cond.s[i], "s");
    const int c = cond.labels[i];
    if (c != kNullClass && (c < 0 || static_cast<std::size_t>(c) >= arch_.n_classes)) {
      throw DomainError("class label " + std::to_string(c) + " outside [0," +
                        std::to_string(arch_.n_classes) + ")");
    }
  }
}

std::unique_ptr<NetInputs> VelocityNet::assemble_inputs(const Tensor& x,
                                                        const Conditioning& cond) const {
  validate(x, cond);
  const std::size_t b = x.rows();
  auto in = std::make_unique<NetInputs>();
  in->x = x;
  in->t = Tensor({b, 1}, cond.t);
  in->s = Tensor({b, 1}, cond.s);
  in->onehot = Tensor({b, arch_.n_classes + 1});
  for (std::size_t i = 0; i < b; ++i) {
    const int c = cond.labels[i];
    in->onehot.at(i, c == kNullClass ? arch_.n_classes : static_cast<std::size_t>(c)) = 1.0;
  }
  in->ptrs = {&in->x, &in->t, &in->s, &in->onehot};
  for (const Tensor& p : params_) in->ptrs.push_back(&p);
  return in;
}

Tensor VelocityNet::eval(const Tensor& x, const Conditioning& cond) const {
  validate(x, cond);
  const std::size_t b = x.rows();
  if (b <= kEvalChunk) {
    auto in = assemble_inputs(x, cond);
    return evaluate(*graph_, std::span<const Tensor* const>(in->ptrs));
  }
  std::vector<Tensor> parts;
  for (std::size_t begin = 0; begin < b; begin += kEvalChunk) {
    const std::size_t end = std::min(b, begin + kEvalChunk);
    Conditioning sub{{cond.t.begin() + static_cast<std::ptrdiff_t>(begin), cond.t.begin() + static_cast<std::ptrdiff_t>(end)},
                     {cond.s.begin() + static_cast<std::ptrdiff_t>(begin), cond.s.begin() + static_cast<std::ptrdiff_t>(end)},
                     {cond.labels.begin() + static_cast<std::ptrdiff_t>(begin), cond.labels.begin() + static_cast<std::ptrdiff_t>(end)}};
    auto in = assemble_inputs(slice_rows(x, begin, end), sub);
    parts.push_back(evaluate(*graph_, std::span<const Tensor* const>(in->ptrs)));
  }
  return concat_rows(parts);
}

Tensor VelocityNet::eval(const Tensor& x, double t, double s, int label) const {
  return eval(x, Conditioning::uniform(x.rows(), t, s, label));
}

TapedForward VelocityNet::forward_taped(const Tensor& x, const Conditioning& cond) const {
  auto in = assemble_inputs(x, cond);
  ForwardResult r = forward(*graph_, std::span<const Tensor* const>(in->ptrs));
  return {std::move(r.output), std::move(r.tape), std::move(in)};
}

std::vector<Tensor> VelocityNet::param_gradients(const Tape& tape, const Tensor& seed) const {
  Gradients g = backward(tape, seed);
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) out.push_back(std::move(*g[4 + i]));
  return out;
}

DualValue VelocityNet::jvp(const Tensor& x, const Conditioning& cond, const Tensor& dx,
                           std::span<const double> dt, std::span<const double> ds) const {
  auto in = assemble_inputs(x, cond);
  const std::size_t b = x.rows();
  if (dt.size() != b || ds.size() != b) {
    throw ShapeError("jvp: time tangents must have one entry per row");
  }
  const Tensor tdt({b, 1}, std::vector<double>(dt.begin(), dt.end()));
  const Tensor tds({b, 1}, std::vector<double>(ds.begin(), ds.end()));
  std::vector<const Tensor*> tangents(in->ptrs.size(), nullptr);
  tangents[0] = &dx;
  tangents[1] = &tdt;
  tangents[2] = &tds;
  return fmlab::jvp(*graph_, std::span<const Tensor* const>(in->ptrs),
                    std::span<const Tensor* const>(tangents));
}

Tensor flow_map(const VelocityNet& net, const Tensor& x, const Conditioning& cond) {
  for (std::size_t i = 0; i < cond.size(); ++i) {
    if (cond.s[i] < cond.t[i]) {
      throw DomainError("flow map requires s >= t, got t = " + std::to_string(cond.t[i]) +
                        ", s = " + std::to_string(cond.s[i]));
    }
  }
  const Tensor f = net.eval(x, cond);
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double h = cond.s[r] - cond.t[r];
    if (h == 0.0) continue;
    auto dst = out.row_span(r);
    auto src = f.row_span(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += h * src[c];
  }
  return out;
}

Tensor flow_map(const VelocityNet& net, const Tensor& x, double t, double s, int label) {
  return flow_map(net, x, Conditioning::uniform(x.rows(), t, s, label));
}

EmaShadow make_ema(const VelocityNet& net, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw DomainError("EMA decay must lie in [0,1]");
  return {net.params(), decay};
}

void ema_update(EmaShadow& ema, std::span<const Tensor> weights) {
  if (weights.size() != ema.shadow.size()) throw ShapeError("ema_update: tensor count mismatch");
  const double d = ema.decay;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require_same_shape(ema.shadow[i], weights[i], "ema_update");
    Tensor& s = ema.shadow[i];
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = d * s[k] + (1.0 - d) * weights[i][k];
  }
}

double params_distance(std::span<const Tensor> a, std::span<const Tensor> b) {
  if (a.size() != b.size()) throw ShapeError("params_distance: tensor count mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_same_shape(a[i], b[i], "params_distance");
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      const double d = a[i][k] - b[i][k];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace fmlab
