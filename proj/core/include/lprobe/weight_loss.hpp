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

#include "lprobe/autodiff.hpp"
#include "lprobe/graph.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace lprobe {

/// Contiguous block of the flat weight vector belonging to one tensor.
struct WeightSegment
{
  std::size_t offset;
  std::size_t length;
};

/**
 * A scalar loss viewed as a function of one flat weight vector, with all
 * data held fixed. Optimisers and sharpness measures only see this view.
 */
class WeightLoss
{
public:
  virtual ~WeightLoss() = default;

  virtual std::size_t dimension() const = 0;
  /// Per-tensor partition of the flat vector, in order.
  virtual std::vector<WeightSegment> segments() const
  {
    return {{0, dimension()}};
  }

  virtual double value(std::span<double const> weights) const = 0;
  /// Writes the gradient into `grad` and returns the loss.
  virtual double value_and_gradient(std::span<double const> weights,
                                    std::span<double> grad) const = 0;
};

/**
 * WeightLoss over a ComputeGraph: the flat vector is the concatenation of the
 * listed parameter nodes, every other leaf keeps its fixed binding.
 */
class GraphLoss : public WeightLoss
{
public:
  GraphLoss(ComputeGraph graph, Bindings fixed, std::vector<NodeId> parameters);

  std::size_t                dimension() const override;
  std::vector<WeightSegment> segments() const override;
  double                     value(std::span<double const> weights) const override;
  double                     value_and_gradient(std::span<double const> weights,
                                                std::span<double> grad) const override;

  /// Loss, gradient and exact Hessian-vector product along `direction`.
  double value_gradient_hvp(std::span<double const> weights, std::span<double const> direction,
                            std::span<double> grad, std::span<double> hvp) const;

  ComputeGraph const &graph() const noexcept
  {
    return graph_;
  }
  std::vector<NodeId> const &parameters() const noexcept
  {
    return parameters_;
  }

  /// Full bindings for `weights`: the fixed leaves plus each parameter slice.
  Bindings bind(std::span<double const> weights) const;

private:
  void scatter(GradientMap const &map, std::span<double> out) const;

  ComputeGraph               graph_;
  Bindings                   fixed_;
  std::vector<NodeId>        parameters_;
  std::vector<WeightSegment> segments_;
  std::size_t                dimension_ = 0;
};

}  // namespace lprobe
