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

#include "lprobe/graph.hpp"

#include "lprobe/error.hpp"

#include <algorithm>
#include <cmath>

namespace lprobe {

std::string_view op_name(OpKind kind)
{
  switch (kind)
  {
  case OpKind::kInput:
    return "input";
  case OpKind::kParameter:
    return "parameter";
  case OpKind::kMatMul:
    return "matmul";
  case OpKind::kAddBroadcast:
    return "add-broadcast";
  case OpKind::kRelu:
    return "relu";
  case OpKind::kSoftmax:
    return "softmax";
  case OpKind::kLog:
    return "log";
  case OpKind::kNegate:
    return "negate";
  case OpKind::kSum:
    return "sum";
  case OpKind::kMean:
    return "mean";
  case OpKind::kScale:
    return "scale";
  case OpKind::kSquare:
    return "square";
  case OpKind::kL2Norm:
    return "l2-norm";
  case OpKind::kCrossEntropy:
    return "cross-entropy-with-labels";
  case OpKind::kKlDivergence:
    return "kl-divergence";
  }
  return "unknown";
}

Node const &ComputeGraph::node(NodeId id) const
{
  if (id >= nodes_.size())
  {
    throw InvalidArgument("node id " + std::to_string(id) + " is not part of the graph");
  }
  return nodes_[id];
}

bool ComputeGraph::has_scalar_output() const
{
  return !nodes_.empty() && element_count(nodes_[output_].shape) == 1;
}

std::vector<NodeId> ComputeGraph::leaves() const
{
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id)
  {
    if (nodes_[id].is_leaf())
    {
      out.push_back(id);
    }
  }
  return out;
}

std::vector<NodeId> ComputeGraph::parameters() const
{
  std::vector<NodeId> out;
  for (NodeId id = 0; id < nodes_.size(); ++id)
  {
    if (nodes_[id].kind == OpKind::kParameter)
    {
      out.push_back(id);
    }
  }
  return out;
}

std::string ComputeGraph::describe(NodeId id) const
{
  auto const &n     = node(id);
  std::string label = n.name.empty() ? std::string("<unnamed>") : n.name;
  return label + " (" + std::string(op_name(n.kind)) + " #" + std::to_string(id) + ")";
}

namespace {

bool is_suffix(Shape const &shorter, Shape const &longer)
{
  if (shorter.size() > longer.size())
  {
    return false;
  }
  return std::equal(shorter.rbegin(), shorter.rend(), longer.rbegin());
}

}  // namespace

NodeId GraphBuilder::push(Node node)
{
  for (auto in : node.inputs)
  {
    check(in);
  }
  graph_.nodes_.push_back(std::move(node));
  return graph_.nodes_.size() - 1;
}

void GraphBuilder::check(NodeId id) const
{
  if (id >= graph_.nodes_.size())
  {
    throw InvalidArgument("node id " + std::to_string(id) + " does not exist yet");
  }
}

Shape const &GraphBuilder::shape(NodeId id) const
{
  check(id);
  return graph_.nodes_[id].shape;
}

NodeId GraphBuilder::input(std::string name, Shape shape)
{
  Tensor::zeros(shape);  // validates dimensions
  return push(Node{OpKind::kInput, {}, std::move(shape), 0.0, std::move(name)});
}

NodeId GraphBuilder::parameter(std::string name, Shape shape)
{
  Tensor::zeros(shape);
  return push(Node{OpKind::kParameter, {}, std::move(shape), 0.0, std::move(name)});
}

NodeId GraphBuilder::matmul(NodeId a, NodeId b)
{
  auto const &sa = shape(a);
  auto const &sb = shape(b);
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
  {
    throw ShapeError("matmul: incompatible shapes " + to_string(sa) + " and " + to_string(sb));
  }
  return push(Node{OpKind::kMatMul, {a, b}, {sa[0], sb[1]}, 0.0, "matmul"});
}

NodeId GraphBuilder::add(NodeId a, NodeId b)
{
  auto const &sa = shape(a);
  auto const &sb = shape(b);
  bool const  ok = sb == sa || sb == Shape{1} || is_suffix(sb, sa);
  if (!ok)
  {
    throw ShapeError("add-broadcast: cannot broadcast " + to_string(sb) + " onto " +
                     to_string(sa));
  }
  return push(Node{OpKind::kAddBroadcast, {a, b}, sa, 0.0, "add"});
}

NodeId GraphBuilder::relu(NodeId a)
{
  return push(Node{OpKind::kRelu, {a}, shape(a), 0.0, "relu"});
}

NodeId GraphBuilder::softmax(NodeId a)
{
  return push(Node{OpKind::kSoftmax, {a}, shape(a), 0.0, "softmax"});
}

NodeId GraphBuilder::log(NodeId a)
{
  return push(Node{OpKind::kLog, {a}, shape(a), 0.0, "log"});
}

NodeId GraphBuilder::negate(NodeId a)
{
  return push(Node{OpKind::kNegate, {a}, shape(a), 0.0, "negate"});
}

NodeId GraphBuilder::sum(NodeId a)
{
  check(a);
  return push(Node{OpKind::kSum, {a}, {1}, 0.0, "sum"});
}

NodeId GraphBuilder::mean(NodeId a)
{
  check(a);
  return push(Node{OpKind::kMean, {a}, {1}, 0.0, "mean"});
}

NodeId GraphBuilder::scale(NodeId a, double factor)
{
  if (!std::isfinite(factor))
  {
    throw NumericError("scale: factor must be finite");
  }
  return push(Node{OpKind::kScale, {a}, shape(a), factor, "scale"});
}

NodeId GraphBuilder::square(NodeId a)
{
  return push(Node{OpKind::kSquare, {a}, shape(a), 0.0, "square"});
}

NodeId GraphBuilder::l2_norm(NodeId a)
{
  check(a);
  return push(Node{OpKind::kL2Norm, {a}, {1}, 0.0, "l2-norm"});
}

NodeId GraphBuilder::cross_entropy(NodeId logits, NodeId labels)
{
  auto const &sl = shape(logits);
  auto const &sy = shape(labels);
  if (sl.size() != 2 || sy.size() != 1 || sy[0] != sl[0])
  {
    throw ShapeError("cross-entropy: logits " + to_string(sl) + " incompatible with labels " +
                     to_string(sy));
  }
  if (graph_.nodes_[labels].kind != OpKind::kInput)
  {
    throw InvalidArgument("cross-entropy: labels must be an input node");
  }
  return push(Node{OpKind::kCrossEntropy, {logits, labels}, {1}, 0.0, "cross-entropy"});
}

NodeId GraphBuilder::kl_divergence(NodeId p, NodeId q)
{
  auto const &sp = shape(p);
  auto const &sq = shape(q);
  if (sp != sq || sp.size() > 2)
  {
    throw ShapeError("kl-divergence: shapes " + to_string(sp) + " and " + to_string(sq) +
                     " must match and have rank <= 2");
  }
  return push(Node{OpKind::kKlDivergence, {p, q}, {1}, 0.0, "kl-divergence"});
}

ComputeGraph GraphBuilder::build(NodeId output) const
{
  check(output);
  ComputeGraph g = graph_;
  g.output_      = output;
  return g;
}

}  // namespace lprobe
