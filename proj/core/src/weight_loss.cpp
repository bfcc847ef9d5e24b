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

#include "lprobe/weight_loss.hpp"

#include "lprobe/error.hpp"

#include <algorithm>

namespace lprobe {

GraphLoss::GraphLoss(ComputeGraph graph, Bindings fixed, std::vector<NodeId> parameters)
  : graph_(std::move(graph))
  , fixed_(std::move(fixed))
  , parameters_(std::move(parameters))
{
  if (!graph_.has_scalar_output())
  {
    throw InvalidArgument("GraphLoss requires a scalar-output graph");
  }
  for (auto id : parameters_)
  {
    auto const &node = graph_.node(id);
    if (!node.is_leaf())
    {
      throw InvalidArgument("GraphLoss parameter " + graph_.describe(id) + " is not a leaf");
    }
    auto const n = element_count(node.shape);
    segments_.push_back({dimension_, n});
    dimension_ += n;
  }
}

std::size_t GraphLoss::dimension() const
{
  return dimension_;
}

std::vector<WeightSegment> GraphLoss::segments() const
{
  return segments_;
}

Bindings GraphLoss::bind(std::span<double const> weights) const
{
  if (weights.size() != dimension_)
  {
    throw ShapeError("weight vector has length " + std::to_string(weights.size()) +
                     ", loss expects " + std::to_string(dimension_));
  }
  Bindings b = fixed_;
  for (std::size_t i = 0; i < parameters_.size(); ++i)
  {
    auto const &seg   = segments_[i];
    auto const  slice = weights.subspan(seg.offset, seg.length);
    b.insert_or_assign(parameters_[i], Tensor(graph_.node(parameters_[i]).shape,
                                              std::vector<double>(slice.begin(), slice.end())));
  }
  return b;
}

void GraphLoss::scatter(GradientMap const &map, std::span<double> out) const
{
  if (out.size() != dimension_)
  {
    throw ShapeError("gradient buffer has length " + std::to_string(out.size()) +
                     ", loss expects " + std::to_string(dimension_));
  }
  for (std::size_t i = 0; i < parameters_.size(); ++i)
  {
    auto const &src = map.at(parameters_[i]).values();
    std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(segments_[i].offset));
  }
}

double GraphLoss::value(std::span<double const> weights) const
{
  return evaluate(graph_, bind(weights)).item();
}

double GraphLoss::value_and_gradient(std::span<double const> weights, std::span<double> grad) const
{
  auto result = lprobe::value_and_gradient(graph_, bind(weights), parameters_);
  scatter(result.gradient, grad);
  return result.value;
}

double GraphLoss::value_gradient_hvp(std::span<double const> weights,
                                     std::span<double const> direction, std::span<double> grad,
                                     std::span<double> hvp) const
{
  Bindings    dir_bindings = bind(direction);
  GradientMap dir;
  for (auto id : parameters_)
  {
    dir.insert_or_assign(id, dir_bindings.at(id));
  }
  auto result = hessian_vector_product(graph_, bind(weights), parameters_, dir);
  scatter(result.gradient, grad);
  scatter(result.hessian_vector, hvp);
  return result.value;
}

}  // namespace lprobe
