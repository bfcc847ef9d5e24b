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
#include <span>
#include <vector>

namespace lprobe {

/// Labelled samples: an N x d feature matrix and N class indices in [0, K).
class Dataset
{
public:
  Dataset() = default;
  Dataset(Tensor features, std::vector<int> labels, std::size_t num_classes);

  std::size_t size() const noexcept
  {
    return labels_.size();
  }
  bool empty() const noexcept
  {
    return labels_.empty();
  }
  std::size_t input_dim() const noexcept
  {
    return input_dim_;
  }
  std::size_t num_classes() const noexcept
  {
    return num_classes_;
  }
  Tensor const &features() const noexcept
  {
    return features_;
  }
  std::vector<int> const &labels() const noexcept
  {
    return labels_;
  }

  /// Labels as a [N] tensor of class indices, the form cross-entropy nodes take.
  Tensor label_tensor() const;

  /// Rows picked by index, in the given order.
  Dataset subset(std::span<std::size_t const> indices) const;

  bool operator==(Dataset const &other) const;

private:
  Tensor           features_;
  std::vector<int> labels_;
  std::size_t      input_dim_   = 0;
  std::size_t      num_classes_ = 0;
};

}  // namespace lprobe
