//------------------------------------------------------------------------------
//
//   Copyright 2026 The lprobe Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#pragma once

#include "lprobe/tensor.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lprobe {

using NodeId = std::size_t;

enum class OpKind
{
  kInput,
  kParameter,
  kMatMul,
  kAddBroadcast,
  kRelu,
  kSoftmax,
  kLog,
  kNegate,
  kSum,
  kMean,
  kScale,
  kSquare,
  kL2Norm,
  kCrossEntropy,
  kKlDivergence,
};

std::string_view op_name(OpKind kind);

struct Node
{
  OpKind              kind;
  std::vector<NodeId> inputs;
  Shape               shape;
  double              factor = 0.0;  // kScale only
  std::string         name;

  bool is_leaf() const noexcept
  {
    return kind == OpKind::kInput || kind == OpKind::kParameter;
  }
};

/**
 * Immutable, topologically ordered expression DAG.
 *
 * Nodes only reference earlier ids, so the storage order is a valid
 * evaluation order. Instances are produced by GraphBuilder and are safe to
 * share between threads; evaluation state lives in the caller.
 */
class ComputeGraph
{
public:
  std::vector<Node> const &nodes() const noexcept
  {
    return nodes_;
  }
  Node const &node(NodeId id) const;
  std::size_t size() const noexcept
  {
    return nodes_.size();
  }
  NodeId output() const noexcept
  {
    return output_;
  }
  bool has_scalar_output() const;

  std::vector<NodeId> leaves() const;
  std::vector<NodeId> parameters() const;

  /// "name (kind #id)" for diagnostics.
  std::string describe(NodeId id) const;

private:
  friend class GraphBuilder;

  std::vector<Node> nodes_;
  NodeId            output_ = 0;
};

/// Incremental constructor for ComputeGraph. Shape checks happen per call.
class GraphBuilder
{
public:
  NodeId input(std::string name, Shape shape);
  NodeId parameter(std::string name, Shape shape);

  NodeId matmul(NodeId a, NodeId b);
  /// a + b where b's shape equals a's, is {1}, or equals a trailing suffix of a's.
  NodeId add(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  /// Normalises over the last dimension.
  NodeId softmax(NodeId a);
  NodeId log(NodeId a);
  NodeId negate(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId scale(NodeId a, double factor);
  NodeId square(NodeId a);
  NodeId l2_norm(NodeId a);
  /// Mean over rows of -log softmax(logits)[label]; labels are a [B] input of class indices.
  NodeId cross_entropy(NodeId logits, NodeId labels);
  /// Mean over rows of sum_k p log(p / q) with probabilities floored at 1e-12.
  NodeId kl_divergence(NodeId p, NodeId q);

  Shape const &shape(NodeId id) const;

  /// Finalises the graph with `output` as its designated result.
  ComputeGraph build(NodeId output) const;

private:
  NodeId push(Node node);
  void   check(NodeId id) const;

  ComputeGraph graph_;
};

}  // namespace lprobe
