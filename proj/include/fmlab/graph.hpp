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

// Define-then-run computation graphs over rank-2 tensors.
//
// A Graph is a static description: inputs, constants and primitive ops in
// topological (insertion) order. Three evaluators run it:
//
//   forward()   values plus a Tape of saved intermediates,
//   backward()  reverse accumulation over a Tape,
//   jvp()       forward-mode (primal, tangent) propagation with no tape.
//
// jvp() never touches reverse-mode machinery, so a directional derivative is
// available for any graph regardless of which inputs are marked
// differentiable. Every reduction runs in fixed left-to-right order.

#ifndef FMLAB_GRAPH_HPP_
#define FMLAB_GRAPH_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmlab/tensor.hpp"

namespace fmlab {

enum class OpKind {
  kInput,
  kConst,
  kMatMul,   // [m,k] x [k,n]
  kAddBias,  // [m,n] + broadcast [1,n]
  kAdd,
  kSub,
  kMul,      // elementwise
  kScale,    // times a fixed scalar
  kSin,
  kCos,
  kTanh,
  kSilu,
  kExp,
  kSquare,
  kConcatCols,
  kSum,      // all elements -> [1,1]
};

const char* op_name(OpKind op);

struct NodeId {
  int index = -1;
  bool valid() const { return index >= 0; }
};

struct DualValue {
  Tensor primal;
  Tensor tangent;

  DualValue() = default;
  DualValue(Tensor p, Tensor t);
  // A value whose tangent is identically zero.
  static DualValue constant(Tensor p);
};

class Graph {
 public:
  struct Node {
    OpKind op;
    std::vector<int> args;
    double scalar = 0.0;
    int input_slot = -1;
    bool differentiable = false;
    Tensor value;  // kConst only
    std::string label;
  };

  NodeId input(const std::string& name, bool differentiable = true);
  NodeId constant(Tensor value, const std::string& name = "");

  NodeId matmul(NodeId a, NodeId b);
  NodeId add_bias(NodeId a, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId sin(NodeId a);
  NodeId cos(NodeId a);
  NodeId tanh(NodeId a);
  NodeId silu(NodeId a);
  NodeId exp(NodeId a);
  NodeId square(NodeId a);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId sum(NodeId a);

  // Overrides the auto-generated label used in error messages.
  void set_label(NodeId id, std::string label);
  void set_output(NodeId id);

  NodeId output() const { return {output_}; }
  std::size_t num_inputs() const { return input_nodes_.size(); }
  std::size_t num_nodes() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  bool input_differentiable(std::size_t slot) const;
  int input_node(std::size_t slot) const;

 private:
  NodeId push(OpKind op, std::vector<int> args, double scalar = 0.0);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<int> input_nodes_;
  int output_ = -1;
};

// Saved forward state sufficient for reverse accumulation. References the
// graph and the caller's input tensors; both must outlive the tape.
class Tape {
 public:
  const Graph& graph() const { return *graph_; }
  const Tensor& value(int node) const { return *refs_[static_cast<std::size_t>(node)]; }
  const Shape& output_shape() const;
  // Node indices in the order backward() will visit them.
  std::vector<int> reverse_order() const;

 private:
  friend struct TapeAccess;
  const Graph* graph_ = nullptr;
  std::vector<Tensor> values_;
  std::vector<const Tensor*> refs_;
  std::vector<char> requires_grad_;
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

// One entry per graph input; empty for inputs not marked differentiable.
using Gradients = std::vector<std::optional<Tensor>>;

// Input tensors are referenced, not copied.
ForwardResult forward(const Graph& graph, std::span<const Tensor> inputs);
ForwardResult forward(const Graph& graph, std::span<const Tensor* const> inputs);
Gradients backward(const Tape& tape, const Tensor& seed);
// Forward evaluation without a tape; intermediates are released after last use.
Tensor evaluate(const Graph& graph, std::span<const Tensor> inputs);
Tensor evaluate(const Graph& graph, std::span<const Tensor* const> inputs);
DualValue jvp(const Graph& graph, std::span<const DualValue> inputs);
// Pointer form: a null tangent stands for an identically zero tangent.
DualValue jvp(const Graph& graph, std::span<const Tensor* const> primals,
              std::span<const Tensor* const> tangents);

}  // namespace fmlab

#endif  // FMLAB_GRAPH_HPP_
