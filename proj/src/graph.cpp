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

#include "fmlab/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "fmlab/errors.hpp"

namespace fmlab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const Tensor& t) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}
MutMap as_mat(Tensor& t) {
  return MutMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::string describe(const Graph::Node& n) { return n.label; }

[[noreturn]] void shape_fail(const Graph::Node& n, const std::string& msg) {
  throw ShapeError("node " + describe(n) + ": " + msg);
}

Shape mat_shape(std::size_t r, std::size_t c) { return {r, c}; }

using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

ConstArrMap as_arr(const Tensor& t) {
  return ConstArrMap(t.raw(), static_cast<Eigen::Index>(t.size()));
}
ArrMap as_arr(Tensor& t) { return ArrMap(t.raw(), static_cast<Eigen::Index>(t.size())); }

Tensor unary_forward(OpKind op, const Tensor& a, double scalar) {
  Tensor out(a.shape());
  auto x = as_arr(a);
  auto y = as_arr(out);
  switch (op) {
    case OpKind::kScale: y = scalar * x; break;
    case OpKind::kSin: y = x.sin(); break;
    case OpKind::kCos: y = x.cos(); break;
    case OpKind::kTanh: y = x.tanh(); break;
    case OpKind::kSilu: y = x / (1.0 + (-x).exp()); break;
    case OpKind::kExp: y = x.exp(); break;
    case OpKind::kSquare: y = x.square(); break;
    default: break;
  }
  return out;
}

// Elementwise derivative of a unary op at input x with output y.
Tensor unary_derivative(OpKind op, const Tensor& xt, const Tensor& yt) {
  Tensor out(xt.shape());
  auto x = as_arr(xt);
  auto y = as_arr(yt);
  auto d = as_arr(out);
  switch (op) {
    case OpKind::kSin: d = x.cos(); break;
    case OpKind::kCos: d = -x.sin(); break;
    case OpKind::kTanh: d = 1.0 - y.square(); break;
    case OpKind::kSilu: {
      Eigen::ArrayXd sg = 1.0 / (1.0 + (-x).exp());
      d = sg * (1.0 + x * (1.0 - sg));
      break;
    }
    case OpKind::kExp: d = y; break;
    case OpKind::kSquare: d = 2.0 * x; break;
    default: break;
  }
  return out;
}

bool is_unary(OpKind op) {
  switch (op) {
    case OpKind::kSin:
    case OpKind::kCos:
    case OpKind::kTanh:
    case OpKind::kSilu:
    case OpKind::kExp:
    case OpKind::kSquare: return true;
    default: return false;
  }
}

void require_rank2(const Graph::Node& n, const Tensor& t) {
  if (t.rank() != 2) shape_fail(n, "expected a rank-2 operand, got " + shape_string(t.shape()));
}

void require_same(const Graph::Node& n, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_fail(n, "operand shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  }
}

// Primal kernel shared by every evaluator so all three agree bit-for-bit.
Tensor compute(const Graph::Node& n, const std::vector<const Tensor*>& in) {
  switch (n.op) {
    case OpKind::kInput:
    case OpKind::kConst: return {};
    case OpKind::kMatMul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      require_rank2(n, a);
      require_rank2(n, b);
      if (a.cols() != b.rows()) {
        shape_fail(n, "matmul " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
      }
      Tensor out(mat_shape(a.rows(), b.cols()));
      as_mat(out).noalias() = as_mat(a) * as_mat(b);
      return out;
    }
    case OpKind::kAddBias: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      require_rank2(n, a);
      if (b.size() != a.cols()) {
        shape_fail(n, "bias " + shape_string(b.shape()) + " for " + shape_string(a.shape()));
      }
      Tensor out = a;
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
      }
      return out;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      require_same(n, a, b);
      Tensor out(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = n.op == OpKind::kAdd   ? a[i] + b[i]
                 : n.op == OpKind::kSub ? a[i] - b[i]
                                        : a[i] * b[i];
      }
      return out;
    }
    case OpKind::kScale:
    case OpKind::kSin:
    case OpKind::kCos:
    case OpKind::kTanh:
    case OpKind::kSilu:
    case OpKind::kExp:
    case OpKind::kSquare: return unary_forward(n.op, *in[0], n.scalar);
    case OpKind::kConcatCols: {
      const std::size_t rows = in[0]->rows();
      std::size_t cols = 0;
      for (const Tensor* t : in) {
        require_rank2(n, *t);
        if (t->rows() != rows) shape_fail(n, "concat row counts differ");
        cols += t->cols();
      }
      Tensor out(mat_shape(rows, cols));
      for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.raw() + r * cols;
        for (const Tensor* t : in) {
          auto src = t->row_span(r);
          dst = std::copy(src.begin(), src.end(), dst);
        }
      }
      return out;
    }
    case OpKind::kSum: {
      double acc = 0.0;
      for (double v : in[0]->data()) acc += v;
      return Tensor::scalar(acc);
    }
  }
  return {};
}

void check_finite(const Graph::Node& n, const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericFault(n.label, std::string("non-finite ") + what);
}

struct Evaluation {
  std::vector<Tensor> values;       // computed nodes and constants
  std::vector<const Tensor*> refs;  // every node; inputs point at the caller's tensors
  std::vector<char> requires_grad;
};

void check_input_count(const Graph& g, std::size_t n) {
  if (n != g.num_inputs()) {
    throw ShapeError("graph expects " + std::to_string(g.num_inputs()) + " inputs, got " +
                     std::to_string(n));
  }
  if (!g.output().valid()) throw Error("graph has no output");
}

Evaluation run_forward(const Graph& g, std::span<const Tensor* const> inputs, bool release) {
  check_input_count(g, inputs.size());
  const std::size_t n = g.num_nodes();
  Evaluation ev;
  ev.values.resize(n);
  ev.refs.assign(n, nullptr);
  ev.requires_grad.assign(n, 0);

  std::vector<int> last_use;
  if (release) {
    last_use.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      for (int a : g.node(static_cast<int>(i)).args) last_use[static_cast<std::size_t>(a)] = static_cast<int>(i);
    }
  }

  std::vector<const Tensor*> args;
  for (std::size_t i = 0; i < n; ++i) {
    const Graph::Node& node = g.node(static_cast<int>(i));
    if (node.op == OpKind::kInput) {
      const Tensor* in = inputs[static_cast<std::size_t>(node.input_slot)];
      check_finite(node, *in, "input");
      ev.refs[i] = in;
      ev.requires_grad[i] = node.differentiable;
      continue;
    }
    if (node.op == OpKind::kConst) {
      ev.refs[i] = &node.value;
      continue;
    }
    args.clear();
    char rg = 0;
    for (int a : node.args) {
      args.push_back(ev.refs[static_cast<std::size_t>(a)]);
      rg |= ev.requires_grad[static_cast<std::size_t>(a)];
    }
    ev.values[i] = compute(node, args);
    ev.refs[i] = &ev.values[i];
    ev.requires_grad[i] = rg;
    check_finite(node, ev.values[i], "value");
    if (release) {
      for (int a : node.args) {
        if (last_use[static_cast<std::size_t>(a)] == static_cast<int>(i) && a != g.output().index) {
          ev.values[static_cast<std::size_t>(a)] = Tensor();
        }
      }
    }
  }
  return ev;
}

std::vector<const Tensor*> pointers(std::span<const Tensor> inputs) {
  std::vector<const Tensor*> p;
  p.reserve(inputs.size());
  for (const Tensor& t : inputs) p.push_back(&t);
  return p;
}

void accumulate(std::optional<Tensor>& slot, Tensor&& contribution) {
  if (!slot) {
    slot = std::move(contribution);
  } else {
    for (std::size_t i = 0; i < slot->size(); ++i) (*slot)[i] += contribution[i];
  }
}

}  // namespace

struct TapeAccess {
  static Tape make(const Graph& g, Evaluation&& ev) {
    Tape t;
    t.graph_ = &g;
    t.values_ = std::move(ev.values);
    t.refs_ = std::move(ev.refs);
    // Computed nodes must point into the tape's own storage after the move.
    for (std::size_t i = 0; i < t.values_.size(); ++i) {
      if (g.node(static_cast<int>(i)).op != OpKind::kInput &&
          g.node(static_cast<int>(i)).op != OpKind::kConst) {
        t.refs_[i] = &t.values_[i];
      }
    }
    t.requires_grad_ = std::move(ev.requires_grad);
    return t;
  }
  static bool requires_grad(const Tape& t, int node) {
    return t.requires_grad_[static_cast<std::size_t>(node)] != 0;
  }
};

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kInput: return "input";
    case OpKind::kConst: return "const";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSin: return "sin";
    case OpKind::kCos: return "cos";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSilu: return "silu";
    case OpKind::kExp: return "exp";
    case OpKind::kSquare: return "square";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kSum: return "sum";
  }
  return "?";
}

DualValue::DualValue(Tensor p, Tensor t) : primal(std::move(p)), tangent(std::move(t)) {
  if (primal.shape() != tangent.shape()) {
    throw ShapeError("dual value: primal " + shape_string(primal.shape()) + " vs tangent " +
                     shape_string(tangent.shape()));
  }
}

DualValue DualValue::constant(Tensor p) {
  Tensor zero(p.shape());
  return DualValue(std::move(p), std::move(zero));
}

NodeId Graph::push(OpKind op, std::vector<int> args, double scalar) {
  Node n;
  n.op = op;
  n.args = std::move(args);
  n.scalar = scalar;
  n.label = std::string(op_name(op)) + "#" + std::to_string(nodes_.size());
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

void Graph::check(NodeId id) const {
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= nodes_.size()) {
    throw Error("graph: invalid node id " + std::to_string(id.index));
  }
}

NodeId Graph::input(const std::string& name, bool differentiable) {
  NodeId id = push(OpKind::kInput, {});
  Node& n = nodes_.back();
  n.input_slot = static_cast<int>(input_nodes_.size());
  n.differentiable = differentiable;
  n.label = "input:" + name;
  input_nodes_.push_back(id.index);
  return id;
}

NodeId Graph::constant(Tensor value, const std::string& name) {
  NodeId id = push(OpKind::kConst, {});
  nodes_.back().value = std::move(value);
  if (!name.empty()) nodes_.back().label = "const:" + name;
  return id;
}

#define FMLAB_BINARY(fn, kind)                NodeId Graph::fn(NodeId a, NodeId b) {        check(a);                                   check(b);                                   return push(kind, {a.index, b.index});    }
FMLAB_BINARY(matmul, OpKind::kMatMul)
FMLAB_BINARY(add_bias, OpKind::kAddBias)
FMLAB_BINARY(add, OpKind::kAdd)
FMLAB_BINARY(sub, OpKind::kSub)
FMLAB_BINARY(mul, OpKind::kMul)
#undef FMLAB_BINARY

#define FMLAB_UNARY(fn, kind)        NodeId Graph::fn(NodeId a) {         check(a);                          return push(kind, {a.index});    }
FMLAB_UNARY(sin, OpKind::kSin)
FMLAB_UNARY(cos, OpKind::kCos)
FMLAB_UNARY(tanh, OpKind::kTanh)
FMLAB_UNARY(silu, OpKind::kSilu)
FMLAB_UNARY(exp, OpKind::kExp)
FMLAB_UNARY(square, OpKind::kSquare)
FMLAB_UNARY(sum, OpKind::kSum)
#undef FMLAB_UNARY

NodeId Graph::scale(NodeId a, double c) {
  check(a);
  return push(OpKind::kScale, {a.index}, c);
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw Error("concat_cols: no operands");
  std::vector<int> args;
  for (NodeId p : parts) {
    check(p);
    args.push_back(p.index);
  }
  return push(OpKind::kConcatCols, std::move(args));
}

void Graph::set_label(NodeId id, std::string label) {
  check(id);
  nodes_[static_cast<std::size_t>(id.index)].label = std::move(label);
}

void Graph::set_output(NodeId id) {
  check(id);
  output_ = id.index;
}

int Graph::input_node(std::size_t slot) const { return input_nodes_.at(slot); }

bool Graph::input_differentiable(std::size_t slot) const {
  return nodes_[static_cast<std::size_t>(input_nodes_.at(slot))].differentiable;
}

const Shape& Tape::output_shape() const { return value(graph_->output().index).shape(); }

std::vector<int> Tape::reverse_order() const {
  std::vector<int> order;
  for (int i = graph_->output().index; i >= 0; --i) {
    if (requires_grad_[static_cast<std::size_t>(i)]) order.push_back(i);
  }
  return order;
}

ForwardResult forward(const Graph& graph, std::span<const Tensor* const> inputs) {
  Evaluation ev = run_forward(graph, inputs, false);
  Tensor out = *ev.refs[static_cast<std::size_t>(graph.output().index)];
  return {std::move(out), TapeAccess::make(graph, std::move(ev))};
}

ForwardResult forward(const Graph& graph, std::span<const Tensor> inputs) {
  const auto p = pointers(inputs);
  return forward(graph, std::span<const Tensor* const>(p));
}

Tensor evaluate(const Graph& graph, std::span<const Tensor* const> inputs) {
  Evaluation ev = run_forward(graph, inputs, true);
  const std::size_t out = static_cast<std::size_t>(graph.output().index);
  const OpKind op = graph.node(graph.output().index).op;
  if (op == OpKind::kInput || op == OpKind::kConst) return *ev.refs[out];
  return std::move(ev.values[out]);
}

Tensor evaluate(const Graph& graph, std::span<const Tensor> inputs) {
  const auto p = pointers(inputs);
  return evaluate(graph, std::span<const Tensor* const>(p));
}

Gradients backward(const Tape& tape, const Tensor& seed) {
  const Graph& g = tape.graph();
  const int out = g.output().index;
  if (seed.shape() != tape.output_shape()) {
    throw ShapeError("backward: seed shape " + shape_string(seed.shape()) +
                     " does not match output " + shape_string(tape.output_shape()));
  }
  std::vector<std::optional<Tensor>> adj(static_cast<std::size_t>(out) + 1);
  adj[static_cast<std::size_t>(out)] = seed;
  Gradients grads(g.num_inputs());

  for (int i : tape.reverse_order()) {
    auto& slot = adj[static_cast<std::size_t>(i)];
    if (!slot) continue;
    const Graph::Node& n = g.node(i);
    const Tensor& dy = *slot;
    check_finite(n, dy, "adjoint");
    auto needs = [&](std::size_t k) { return TapeAccess::requires_grad(tape, n.args[k]); };
    auto arg_adj = [&](std::size_t k) -> std::optional<Tensor>& {
      return adj[static_cast<std::size_t>(n.args[k])];
    };
    auto arg_val = [&](std::size_t k) -> const Tensor& { return tape.value(n.args[k]); };

    switch (n.op) {
      case OpKind::kInput:
        grads[static_cast<std::size_t>(n.input_slot)] = std::move(*slot);
        break;
      case OpKind::kConst: break;
      case OpKind::kMatMul: {
        const Tensor& a = arg_val(0);
        const Tensor& b = arg_val(1);
        if (needs(0)) {
          Tensor da(a.shape());
          as_mat(da).noalias() = as_mat(dy) * as_mat(b).transpose();
          accumulate(arg_adj(0), std::move(da));
        }
        if (needs(1)) {
          Tensor db(b.shape());
          as_mat(db).noalias() = as_mat(a).transpose() * as_mat(dy);
          accumulate(arg_adj(1), std::move(db));
        }
        break;
      }
      case OpKind::kAddBias: {
        if (needs(0)) accumulate(arg_adj(0), Tensor(dy));
        if (needs(1)) {
          Tensor db(arg_val(1).shape());
          for (std::size_t r = 0; r < dy.rows(); ++r) {
            auto row = dy.row_span(r);
            for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
          }
          accumulate(arg_adj(1), std::move(db));
        }
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        if (needs(0)) accumulate(arg_adj(0), Tensor(dy));
        if (needs(1)) accumulate(arg_adj(1), n.op == OpKind::kAdd ? Tensor(dy) : -1.0 * dy);
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = arg_val(0);
        const Tensor& b = arg_val(1);
        if (needs(0)) {
          Tensor da(a.shape());
          for (std::size_t k = 0; k < da.size(); ++k) da[k] = dy[k] * b[k];
          accumulate(arg_adj(0), std::move(da));
        }
        if (needs(1)) {
          Tensor db(b.shape());
          for (std::size_t k = 0; k < db.size(); ++k) db[k] = dy[k] * a[k];
          accumulate(arg_adj(1), std::move(db));
        }
        break;
      }
      case OpKind::kScale:
        if (needs(0)) accumulate(arg_adj(0), n.scalar * dy);
        break;
      case OpKind::kConcatCols: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.args.size(); ++k) {
          const Tensor& part = arg_val(k);
          const std::size_t pc = part.cols();
          if (needs(k)) {
            Tensor dp(part.shape());
            for (std::size_t r = 0; r < dy.rows(); ++r) {
              const double* src = dy.raw() + r * dy.cols() + offset;
              std::copy(src, src + pc, dp.raw() + r * pc);
            }
            accumulate(arg_adj(k), std::move(dp));
          }
          offset += pc;
        }
        break;
      }
      case OpKind::kSum:
        if (needs(0)) accumulate(arg_adj(0), Tensor(arg_val(0).shape(), dy[0]));
        break;
      default: {
        if (!is_unary(n.op) || !needs(0)) break;
        Tensor dx = unary_derivative(n.op, arg_val(0), tape.value(i));
        as_arr(dx) *= as_arr(dy);
        accumulate(arg_adj(0), std::move(dx));
        break;
      }
    }
    if (n.op != OpKind::kInput) slot.reset();
  }
  // Differentiable inputs the output does not depend on get a zero gradient.
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!grads[k] && g.input_differentiable(k)) {
      grads[k] = Tensor(tape.value(g.input_node(k)).shape());
    }
  }
  return grads;
}

DualValue jvp(const Graph& g, std::span<const Tensor* const> primals,
              std::span<const Tensor* const> tangents) {
  check_input_count(g, primals.size());
  if (tangents.size() != primals.size()) throw ShapeError("jvp: one tangent per input required");
  const std::size_t n = g.num_nodes();
  const int out = g.output().index;
  std::vector<Tensor> owned(n);
  std::vector<const Tensor*> val(n, nullptr);
  std::vector<std::optional<Tensor>> tan(n);  // empty == identically zero

  std::vector<const Tensor*> args;
  for (std::size_t i = 0; i <= static_cast<std::size_t>(out); ++i) {
    const Graph::Node& node = g.node(static_cast<int>(i));
    if (node.op == OpKind::kInput) {
      const std::size_t slot = static_cast<std::size_t>(node.input_slot);
      const Tensor* p = primals[slot];
      check_finite(node, *p, "input");
      val[i] = p;
      if (const Tensor* t = tangents[slot]) {
        if (t->shape() != p->shape()) {
          shape_fail(node, "tangent shape " + shape_string(t->shape()) + " differs from primal " +
                               shape_string(p->shape()));
        }
        check_finite(node, *t, "input tangent");
        if (!t->all_zero()) tan[i] = *t;
      }
      continue;
    }
    if (node.op == OpKind::kConst) {
      val[i] = &node.value;
      continue;
    }
    args.clear();
    bool active = false;
    for (int a : node.args) {
      args.push_back(val[static_cast<std::size_t>(a)]);
      active = active || tan[static_cast<std::size_t>(a)].has_value();
    }
    owned[i] = compute(node, args);
    val[i] = &owned[i];
    check_finite(node, owned[i], "value");
    if (!active) continue;

    auto t_of = [&](std::size_t k) -> const std::optional<Tensor>& {
      return tan[static_cast<std::size_t>(node.args[k])];
    };
    const Tensor& y = owned[i];
    Tensor dy(y.shape());
    switch (node.op) {
      case OpKind::kMatMul: {
        auto out_map = as_mat(dy);
        if (t_of(0)) out_map.noalias() += as_mat(*t_of(0)) * as_mat(*args[1]);
        if (t_of(1)) out_map.noalias() += as_mat(*args[0]) * as_mat(*t_of(1));
        break;
      }
      case OpKind::kAddBias: {
        if (t_of(0)) dy = *t_of(0);
        if (t_of(1)) {
          for (std::size_t r = 0; r < dy.rows(); ++r) {
            auto row = dy.row_span(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += (*t_of(1))[c];
          }
        }
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign = node.op == OpKind::kAdd ? 1.0 : -1.0;
        if (t_of(0)) dy = *t_of(0);
        if (t_of(1)) axpy(sign, *t_of(1), dy);
        break;
      }
      case OpKind::kMul: {
        for (std::size_t k = 0; k < dy.size(); ++k) {
          double acc = 0.0;
          if (t_of(0)) acc += (*t_of(0))[k] * (*args[1])[k];
          if (t_of(1)) acc += (*args[0])[k] * (*t_of(1))[k];
          dy[k] = acc;
        }
        break;
      }
      case OpKind::kScale: dy = node.scalar * *t_of(0); break;
      case OpKind::kConcatCols: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < node.args.size(); ++k) {
          const std::size_t pc = args[k]->cols();
          if (t_of(k)) {
            for (std::size_t r = 0; r < dy.rows(); ++r) {
              const double* src = t_of(k)->raw() + r * pc;
              std::copy(src, src + pc, dy.raw() + r * dy.cols() + offset);
            }
          }
          offset += pc;
        }
        break;
      }
      case OpKind::kSum: {
        double acc = 0.0;
        for (double v : t_of(0)->data()) acc += v;
        dy[0] = acc;
        break;
      }
      default: {
        dy = unary_derivative(node.op, *args[0], y);
        as_arr(dy) *= as_arr(*t_of(0));
        break;
      }
    }
    check_finite(node, dy, "tangent");
    tan[i] = std::move(dy);
  }
  Tensor primal = *val[static_cast<std::size_t>(out)];
  Tensor tangent = tan[static_cast<std::size_t>(out)] ? std::move(*tan[static_cast<std::size_t>(out)])
                                                      : Tensor(primal.shape());
  return DualValue(std::move(primal), std::move(tangent));
}

DualValue jvp(const Graph& g, std::span<const DualValue> inputs) {
  std::vector<const Tensor*> p, t;
  for (const DualValue& d : inputs) {
    if (d.primal.shape() != d.tangent.shape()) {
      throw ShapeError("jvp: tangent shape " + shape_string(d.tangent.shape()) +
                       " differs from primal " + shape_string(d.primal.shape()));
    }
    p.push_back(&d.primal);
    t.push_back(&d.tangent);
  }
  return jvp(g, std::span<const Tensor* const>(p), std::span<const Tensor* const>(t));
}

}  // namespace fmlab
