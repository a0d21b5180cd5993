#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "isqn/matrix.hpp"
#include "isqn/params.hpp"

namespace isqn {

using NodeId = std::size_t;

enum class TapeOp {
  Constant,
  Param,
  MatMul,
  AddRow,
  Add,
  Sub,
  Scale,
  Relu,
  LayerNorm,
  Square,
  Sum,
  Mean,
  MaxRow,
  LogSumExpRow,
  MellowMaxRow,
  Gather,
  AffineConst,
  StopGradient,
};

/// Reverse-mode differentiation record for small dense computations.
///
/// Nodes are appended in evaluation order, so insertion order is a valid
/// topological order. Only nodes reachable from a parameter without crossing a
/// stop-gradient marker carry `requires_grad`; the backward pass never enters
/// the others, which makes gradients through a stop-gradient exactly zero.
class Tape {
 public:
  NodeId constant(Matrix value);
  /// Leaf bound to `params[id]`. Gradients are collected only for leaves whose
  /// owner is the ParamSet handed to backward().
  NodeId param(const ParamSet& params, ParamId id);

  NodeId matmul(NodeId a, NodeId b);
  /// x + bias broadcast over rows (bias is 1×cols).
  NodeId add_row(NodeId x, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId relu(NodeId a);
  NodeId layernorm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId square(NodeId a);
  /// Sum of all entries as a 1×1 node.
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  /// Row-wise reductions producing rows×1 nodes.
  NodeId max_row(NodeId a);
  NodeId logsumexp_row(NodeId a);
  NodeId mellowmax_row(NodeId a, double omega);
  /// Picks a[r, index[r]] into a rows×1 node.
  NodeId gather(NodeId a, std::vector<std::size_t> index);
  /// offset + factor ⊙ a, with constant offset and factor of a's shape.
  NodeId affine_const(NodeId a, Matrix factor, Matrix offset);
  NodeId stop_gradient(NodeId a);

  const Matrix& value(NodeId id) const { return nodes_.at(id).value; }
  double scalar(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  TapeOp op(NodeId id) const { return nodes_.at(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the 1×1 node `loss`, scaled by `seed`, for every array of
  /// `params`. Throws UsageError if `loss` is not a scalar.
  Gradients backward(NodeId loss, const ParamSet& params, double seed = 1.0) const;

 private:
  struct Node {
    TapeOp op = TapeOp::Constant;
    std::size_t n_inputs = 0;
    NodeId in[3] = {0, 0, 0};
    Matrix value;
    bool requires_grad = false;
    double scalar = 0.0;
    const ParamSet* owner = nullptr;
    ParamId param = 0;
    std::vector<std::size_t> index;
    Matrix aux_a;
    Matrix aux_b;
    std::vector<double> aux_row;
  };

  static Node make_node(TapeOp op, std::initializer_list<NodeId> inputs);
  NodeId push(Node node);
  const Node& at(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace isqn
