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
#include "lprobe/weight_loss.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lprobe {

enum class Activation
{
  kRelu,
};

/// Architecture of a fully connected classifier. Empty hidden_dims is a linear model.
struct ModelSpec
{
  std::size_t              input_dim   = 16;
  std::vector<std::size_t> hidden_dims = {32};
  std::size_t              num_classes = 3;
  Activation               activation  = Activation::kRelu;
  std::uint64_t            init_seed   = 0;

  bool operator==(ModelSpec const &) const = default;
};

void        validate(ModelSpec const &spec);
std::size_t parameter_count(ModelSpec const &spec);

/// Flat layout: for each layer, the [fan_in x fan_out] weight matrix then the bias.
std::vector<WeightSegment> layer_segments(ModelSpec const &spec);

/// Adds one parameter node per weight matrix and bias, in flat-layout order.
std::vector<NodeId> add_parameters(GraphBuilder &builder, ModelSpec const &spec);

/// Appends the forward pass of `input` ([B x input_dim]) and returns the logits node.
NodeId add_forward(GraphBuilder &builder, ModelSpec const &spec, std::span<NodeId const> params,
                   NodeId input);

/// Binds slices of a flat weight vector to the nodes returned by add_parameters.
void bind_weights(Bindings &bindings, ModelSpec const &spec, std::span<NodeId const> params,
                  std::span<double const> weights);

/**
 * Feed-forward classifier with a flat weight vector W and an immutable copy
 * W0 of the weights it was initialised with.
 */
class Model
{
public:
  /// Scaled-uniform (Glorot) weights, zero biases, deterministic in spec.init_seed.
  explicit Model(ModelSpec spec);

  /// Restores a model from stored weights; both vectors must have parameter_count(spec) entries.
  static Model from_weights(ModelSpec spec, std::vector<double> weights,
                            std::vector<double> initial_weights);

  ModelSpec const &spec() const noexcept
  {
    return spec_;
  }
  std::size_t parameter_count() const noexcept
  {
    return weights_.size();
  }

  std::span<double const> weights() const noexcept
  {
    return weights_;
  }
  std::span<double const> initial_weights() const noexcept
  {
    return initial_;
  }

  std::vector<double> get_flat_weights() const
  {
    return weights_;
  }
  /// Replaces W; W0 is untouched.
  void set_flat_weights(std::span<double const> weights);

  /// Logits for a [B x input_dim] batch.
  Tensor forward(Tensor const &batch) const;

private:
  Model(ModelSpec spec, std::vector<double> weights, std::vector<double> initial);

  ModelSpec           spec_;
  std::vector<double> weights_;
  std::vector<double> initial_;
};

inline Model init_model(ModelSpec spec)
{
  return Model(std::move(spec));
}

/// Extra key=value lines stored alongside a checkpoint (objective, seed, ...).
using CheckpointMetadata = std::map<std::string, std::string>;

struct Checkpoint
{
  Model              model;
  CheckpointMetadata metadata;
};

/**
 * Checkpoint layout: the line "LPROBE1", then key=value header lines (spec
 * fields, param_count, metadata), a blank line, then W and W0 as
 * little-endian IEEE-754 doubles.
 */
void       save_checkpoint(Model const &model, std::filesystem::path const &path,
                           CheckpointMetadata const &metadata = {});
Checkpoint load_checkpoint(std::filesystem::path const &path);

std::string serialize_checkpoint(Model const &model, CheckpointMetadata const &metadata = {});
Checkpoint  parse_checkpoint(std::string const &bytes);

}  // namespace lprobe
