#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "tsadapt/tensor.hpp"

namespace tsadapt {

/// Handle into a GradientTape. Valid only for the tape that produced it.
struct NodeId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
};

/// Reverse-mode tape. Nodes are created in topological order (an op may
/// only consume earlier nodes), so the backward pass is a single reverse
/// walk over the node list. Single-threaded by construction; independent
/// tapes share nothing.
class GradientTape {
 public:
  /// Frozen value: participates in forward, never accumulates gradient.
  NodeId constant(Tensor value);
  /// Trainable leaf: gradient buffer allocated, populated by backward().
  NodeId leaf(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_nt(NodeId a, NodeId b);  // a · bᵀ
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId add_rowvec(NodeId a, NodeId v);  // v broadcast over rows of a
  NodeId mul_rowvec(NodeId a, NodeId v);
  NodeId relu(NodeId a);
  NodeId gelu(NodeId a);
  /// Row softmax. With `causal`, entry (i,j) for j > i is masked out
  /// before normalization (rows must index a square score matrix).
  NodeId softmax_rows(NodeId a, bool causal = false);
  NodeId layer_norm_rows(NodeId a, double eps);
  NodeId slice_cols(NodeId a, std::size_t start, std::size_t len);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId reshape(NodeId a, std::vector<std::size_t> shape);
  NodeId sum(NodeId a);  // scalar
  /// Column means over rows: m×n → 1×n.
  NodeId mean_rows(NodeId a);
  /// Mean of squared differences against a constant target.
  NodeId mse_against(NodeId pred, const Tensor& target);
  /// Symmetric MAPE against a constant target (subgradient at kinks;
  /// a term with both values zero contributes nothing).
  NodeId smape_against(NodeId pred, const Tensor& target);
  /// Cross-entropy of row-logits against an integer label (single row).
  NodeId cross_entropy(NodeId logits, std::size_t label);

  void backward(NodeId loss_node);

  const Tensor& value(NodeId id) const { return nodes_[id.index].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id.index].grad; }
  bool requires_grad(NodeId id) const { return nodes_[id.index].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty unless requires_grad
    bool requires_grad = false;
    std::function<void(GradientTape&, const Tensor&)> backward;
  };

  NodeId push(Tensor value, bool requires_grad,
              std::function<void(GradientTape&, const Tensor&)> back);
  void accumulate(NodeId id, const Tensor& g);

  std::vector<Node> nodes_;
};

}  // namespace tsadapt
