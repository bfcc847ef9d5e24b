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

#include "lprobe/model.hpp"

#include "lprobe/autodiff.hpp"
#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lprobe {
namespace {

constexpr char const *kMagic = "LPROBE1";

std::vector<std::size_t> layer_widths(ModelSpec const &spec)
{
  std::vector<std::size_t> widths;
  widths.push_back(spec.input_dim);
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(spec.num_classes);
  return widths;
}

}  // namespace

void validate(ModelSpec const &spec)
{
  if (spec.input_dim == 0)
  {
    throw InvalidArgument("model input_dim must be positive");
  }
  if (spec.num_classes < 2)
  {
    throw InvalidArgument("model num_classes must be at least 2");
  }
  for (auto h : spec.hidden_dims)
  {
    if (h == 0)
    {
      throw InvalidArgument("model hidden layer widths must be positive");
    }
  }
}

std::size_t parameter_count(ModelSpec const &spec)
{
  std::size_t n = 0;
  for (auto const &seg : layer_segments(spec))
  {
    n += seg.length;
  }
  return n;
}

std::vector<WeightSegment> layer_segments(ModelSpec const &spec)
{
  auto const                 widths = layer_widths(spec);
  std::vector<WeightSegment> out;
  std::size_t                offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
  {
    out.push_back({offset, widths[l] * widths[l + 1]});
    offset += widths[l] * widths[l + 1];
    out.push_back({offset, widths[l + 1]});
    offset += widths[l + 1];
  }
  return out;
}

std::vector<NodeId> add_parameters(GraphBuilder &builder, ModelSpec const &spec)
{
  auto const          widths = layer_widths(spec);
  std::vector<NodeId> params;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
  {
    params.push_back(builder.parameter("W" + std::to_string(l), {widths[l], widths[l + 1]}));
    params.push_back(builder.parameter("b" + std::to_string(l), {widths[l + 1]}));
  }
  return params;
}

NodeId add_forward(GraphBuilder &builder, ModelSpec const &spec, std::span<NodeId const> params,
                   NodeId input)
{
  std::size_t const layers = spec.hidden_dims.size() + 1;
  if (params.size() != 2 * layers)
  {
    throw InvalidArgument("expected " + std::to_string(2 * layers) + " parameter nodes, got " +
                          std::to_string(params.size()));
  }
  NodeId h = input;
  for (std::size_t l = 0; l < layers; ++l)
  {
    h = builder.add(builder.matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers)
    {
      h = builder.relu(h);
    }
  }
  return h;
}

void bind_weights(Bindings &bindings, ModelSpec const &spec, std::span<NodeId const> params,
                  std::span<double const> weights)
{
  auto const segments = layer_segments(spec);
  if (params.size() != segments.size())
  {
    throw InvalidArgument("bind_weights: parameter node count does not match the architecture");
  }
  if (weights.size() != parameter_count(spec))
  {
    throw ShapeError("bind_weights: expected " + std::to_string(parameter_count(spec)) +
                     " weights, got " + std::to_string(weights.size()));
  }
  auto const widths = layer_widths(spec);
  for (std::size_t i = 0; i < segments.size(); ++i)
  {
    auto const  slice = weights.subspan(segments[i].offset, segments[i].length);
    std::size_t l     = i / 2;
    Shape       shape = i % 2 == 0 ? Shape{widths[l], widths[l + 1]} : Shape{widths[l + 1]};
    bindings.insert_or_assign(params[i],
                              Tensor(std::move(shape), std::vector<double>(slice.begin(), slice.end())));
  }
}

Model::Model(ModelSpec spec)
  : spec_(std::move(spec))
{
  validate(spec_);
  auto const widths = layer_widths(spec_);
  Rng        rng(spec_.init_seed);
  weights_.reserve(lprobe::parameter_count(spec_));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
  {
    double const bound = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
    for (std::size_t i = 0; i < widths[l] * widths[l + 1]; ++i)
    {
      weights_.push_back(rng.uniform(-bound, bound));
    }
    weights_.insert(weights_.end(), widths[l + 1], 0.0);
  }
  initial_ = weights_;
}

Model::Model(ModelSpec spec, std::vector<double> weights, std::vector<double> initial)
  : spec_(std::move(spec))
  , weights_(std::move(weights))
  , initial_(std::move(initial))
{}

Model Model::from_weights(ModelSpec spec, std::vector<double> weights,
                          std::vector<double> initial_weights)
{
  validate(spec);
  auto const n = lprobe::parameter_count(spec);
  if (weights.size() != n || initial_weights.size() != n)
  {
    throw ShapeError("model spec needs " + std::to_string(n) + " weights, got " +
                     std::to_string(weights.size()) + " and " +
                     std::to_string(initial_weights.size()));
  }
  for (auto const *vec : {&weights, &initial_weights})
  {
    for (double w : *vec)
    {
      if (!std::isfinite(w))
      {
        throw NumericError("non-finite weight");
      }
    }
  }
  return Model(std::move(spec), std::move(weights), std::move(initial_weights));
}

void Model::set_flat_weights(std::span<double const> weights)
{
  if (weights.size() != weights_.size())
  {
    throw ShapeError("set_flat_weights: expected " + std::to_string(weights_.size()) +
                     " values, got " + std::to_string(weights.size()));
  }
  weights_.assign(weights.begin(), weights.end());
}

Tensor Model::forward(Tensor const &batch) const
{
  if (batch.rank() != 2 || batch.cols() != spec_.input_dim)
  {
    throw ShapeError("forward: batch shape " + to_string(batch.shape()) + " does not match input_dim " +
                     std::to_string(spec_.input_dim));
  }
  GraphBuilder b;
  NodeId const x      = b.input("x", batch.shape());
  auto const   params = add_parameters(b, spec_);
  NodeId const logits = add_forward(b, spec_, params, x);
  Bindings     bindings{{x, batch}};
  bind_weights(bindings, spec_, params, weights_);
  ComputeGraph graph = b.build(logits);
  return evaluate(graph, bindings);
}

// --- checkpoint ------------------------------------------------------------

namespace {

void put_le(std::string &out, double value)
{
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i)
  {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
  }
}

double get_le(std::string const &in, std::size_t pos)
{
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
  {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

std::string join(std::vector<std::size_t> const &v)
{
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    out += (i ? "," : "") + std::to_string(v[i]);
  }
  return out;
}

std::size_t parse_size(std::string const &key, std::string const &value)
{
  try
  {
    std::size_t pos = 0;
    auto        n   = std::stoull(value, &pos);
    if (pos != value.size())
    {
      throw FormatError("");
    }
    return static_cast<std::size_t>(n);
  }
  catch (std::exception const &)
  {
    throw FormatError("checkpoint: invalid integer for " + key + ": '" + value + "'");
  }
}

}  // namespace

std::string serialize_checkpoint(Model const &model, CheckpointMetadata const &metadata)
{
  auto const &spec = model.spec();
  std::string out  = std::string(kMagic) + "\n";
  out += "input_dim=" + std::to_string(spec.input_dim) + "\n";
  out += "hidden_dims=" + join(spec.hidden_dims) + "\n";
  out += "num_classes=" + std::to_string(spec.num_classes) + "\n";
  out += "activation=relu\n";
  out += "init_seed=" + std::to_string(spec.init_seed) + "\n";
  out += "param_count=" + std::to_string(model.parameter_count()) + "\n";
  for (auto const &[key, value] : metadata)
  {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos)
    {
      throw InvalidArgument("checkpoint metadata may not contain '=' in keys or newlines");
    }
    out += "meta." + key + "=" + value + "\n";
  }
  out += "\n";
  for (double w : model.weights())
  {
    put_le(out, w);
  }
  for (double w : model.initial_weights())
  {
    put_le(out, w);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string const &bytes)
{
  std::size_t pos  = 0;
  auto        line = [&]() -> std::string {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos)
    {
      throw FormatError("checkpoint: truncated header");
    }
    std::string s = bytes.substr(pos, nl - pos);
    pos           = nl + 1;
    return s;
  };

  if (line() != kMagic)
  {
    throw FormatError("checkpoint: missing LPROBE1 magic");
  }
  ModelSpec          spec;
  CheckpointMetadata meta;
  std::size_t        declared = 0;
  bool               saw_dim = false, saw_classes = false, saw_count = false;
  for (std::string l = line(); !l.empty(); l = line())
  {
    auto eq = l.find('=');
    if (eq == std::string::npos)
    {
      throw FormatError("checkpoint: malformed header line '" + l + "'");
    }
    std::string key = l.substr(0, eq), value = l.substr(eq + 1);
    if (key == "input_dim")
    {
      spec.input_dim = parse_size(key, value);
      saw_dim        = true;
    }
    else if (key == "hidden_dims")
    {
      spec.hidden_dims.clear();
      std::stringstream ss(value);
      for (std::string item; std::getline(ss, item, ',');)
      {
        spec.hidden_dims.push_back(parse_size(key, item));
      }
    }
    else if (key == "num_classes")
    {
      spec.num_classes = parse_size(key, value);
      saw_classes      = true;
    }
    else if (key == "activation")
    {
      if (value != "relu")
      {
        throw FormatError("checkpoint: unsupported activation '" + value + "'");
      }
    }
    else if (key == "init_seed")
    {
      spec.init_seed = parse_size(key, value);
    }
    else if (key == "param_count")
    {
      declared  = parse_size(key, value);
      saw_count = true;
    }
    else if (key.rfind("meta.", 0) == 0)
    {
      meta[key.substr(5)] = value;
    }
    else
    {
      throw FormatError("checkpoint: unknown header key '" + key + "'");
    }
  }
  if (!saw_dim || !saw_classes || !saw_count)
  {
    throw FormatError("checkpoint: header is missing input_dim, num_classes or param_count");
  }
  try
  {
    validate(spec);
  }
  catch (InvalidArgument const &e)
  {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  auto const n = parameter_count(spec);
  if (declared != n)
  {
    throw FormatError("checkpoint: param_count " + std::to_string(declared) +
                      " disagrees with the architecture (" + std::to_string(n) + ")");
  }
  if (bytes.size() - pos != 2 * 8 * n)
  {
    throw FormatError("checkpoint: expected " + std::to_string(16 * n) + " payload bytes, found " +
                      std::to_string(bytes.size() - pos));
  }
  std::vector<double> w(n), w0(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    w[i]  = get_le(bytes, pos + 8 * i);
    w0[i] = get_le(bytes, pos + 8 * (n + i));
  }
  return Checkpoint{Model::from_weights(spec, std::move(w), std::move(w0)), std::move(meta)};
}

void save_checkpoint(Model const &model, std::filesystem::path const &path,
                     CheckpointMetadata const &metadata)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw Error("cannot open " + path.string() + " for writing");
  }
  auto const bytes = serialize_checkpoint(model, metadata);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw Error("failed writing " + path.string());
  }
}

Checkpoint load_checkpoint(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw FormatError("cannot open checkpoint " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace lprobe
