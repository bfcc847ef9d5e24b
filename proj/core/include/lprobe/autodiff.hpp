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

#include "lprobe/graph.hpp"
#include "lprobe/tensor.hpp"

#include <map>
#include <span>
#include <unordered_map>

namespace lprobe {

/// Leaf values for one evaluation. Must cover every leaf of the graph.
using Bindings = std::unordered_map<NodeId, Tensor>;

/// d(scalar output)/d(leaf) keyed by leaf id; iteration order is by id.
using GradientMap = std::map<NodeId, Tensor>;

/**
 * Runs the graph forward and returns its designated output.
 *
 * Throws ShapeError when a binding's shape disagrees with its declaration and
 * NumericError when any intermediate becomes non-finite; both name the node.
 */
Tensor evaluate(ComputeGraph const &graph, Bindings const &bindings);

struct ValueAndGradient
{
  double      value;
  GradientMap gradient;
};

/// Exact reverse-mode gradient of a scalar-output graph.
GradientMap gradient(ComputeGraph const &graph, Bindings const &bindings,
                     std::span<NodeId const> wrt);

ValueAndGradient value_and_gradient(ComputeGraph const &graph, Bindings const &bindings,
                                    std::span<NodeId const> wrt);

/// Central differences (L(w+h) - L(w-h)) / 2h per coordinate. Test oracle.
GradientMap finite_difference_gradient(ComputeGraph const &graph, Bindings const &bindings,
                                       std::span<NodeId const> wrt, double h);

struct HessianVectorResult
{
  double      value;
  GradientMap gradient;
  GradientMap hessian_vector;  // H * direction
};

/**
 * Gradient together with the exact Hessian-vector product H·v.
 *
 * The reverse sweep is run on dual numbers whose tangent is seeded with
 * `direction` on the `wrt` leaves (forward-over-reverse), so no finite
 * differencing is involved.
 */
HessianVectorResult hessian_vector_product(ComputeGraph const &graph, Bindings const &bindings,
                                           std::span<NodeId const> wrt,
                                           GradientMap const &direction);

}  // namespace lprobe
