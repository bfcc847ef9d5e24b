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

#include "lprobe/dataset.hpp"

#include "lprobe/error.hpp"

namespace lprobe {

Dataset::Dataset(Tensor features, std::vector<int> labels, std::size_t num_classes)
  : features_(std::move(features))
  , labels_(std::move(labels))
  , num_classes_(num_classes)
{
  if (features_.rank() != 2)
  {
    throw ShapeError("dataset features must be rank 2, got " + to_string(features_.shape()));
  }
  if (features_.rows() != labels_.size())
  {
    throw ShapeError("dataset has " + std::to_string(features_.rows()) + " feature rows but " +
                     std::to_string(labels_.size()) + " labels");
  }
  if (num_classes_ < 2)
  {
    throw InvalidArgument("dataset needs at least 2 classes");
  }
  input_dim_ = features_.cols();
  for (std::size_t i = 0; i < labels_.size(); ++i)
  {
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= num_classes_)
    {
      throw InvalidArgument("label " + std::to_string(labels_[i]) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(num_classes_) +
                            ")");
    }
  }
}

Tensor Dataset::label_tensor() const
{
  std::vector<double> y(labels_.begin(), labels_.end());
  return Tensor({labels_.size()}, std::move(y));
}

Dataset Dataset::subset(std::span<std::size_t const> indices) const
{
  if (indices.empty())
  {
    throw InvalidArgument("cannot take an empty subset");
  }
  std::vector<double> rows;
  std::vector<int>    labels;
  rows.reserve(indices.size() * input_dim_);
  labels.reserve(indices.size());
  auto const data = features_.data();
  for (auto i : indices)
  {
    if (i >= size())
    {
      throw InvalidArgument("subset index " + std::to_string(i) + " out of range");
    }
    auto const row = data.subspan(i * input_dim_, input_dim_);
    rows.insert(rows.end(), row.begin(), row.end());
    labels.push_back(labels_[i]);
  }
  return Dataset(Tensor({indices.size(), input_dim_}, std::move(rows)), std::move(labels),
                 num_classes_);
}

bool Dataset::operator==(Dataset const &other) const
{
  return num_classes_ == other.num_classes_ && labels_ == other.labels_ &&
         features_ == other.features_;
}

}  // namespace lprobe
