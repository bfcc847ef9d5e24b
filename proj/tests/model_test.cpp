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

#include "lprobe/error.hpp"
#include "lprobe/measures.hpp"
#include "lprobe/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace lprobe;

ModelSpec make_spec(std::size_t in, std::vector<std::size_t> hidden, std::size_t classes,
                    std::uint64_t seed = 0)
{
  ModelSpec s;
  s.input_dim   = in;
  s.hidden_dims = std::move(hidden);
  s.num_classes = classes;
  s.init_seed   = seed;
  return s;
}

TEST(ModelTest, ParameterCounts)
{
  EXPECT_EQ(parameter_count(make_spec(2, {}, 3)), 9u);
  EXPECT_EQ(parameter_count(make_spec(8, {16}, 3)), 195u);
  EXPECT_EQ(Model(make_spec(8, {16}, 3)).parameter_count(), 195u);
}

TEST(ModelTest, RejectsInvalidSpecs)
{
  EXPECT_THROW(validate(make_spec(0, {}, 3)), InvalidArgument);
  EXPECT_THROW(validate(make_spec(2, {}, 1)), InvalidArgument);
  EXPECT_THROW(validate(make_spec(2, {0}, 3)), InvalidArgument);
}

TEST(ModelTest, InitIsDeterministicAndBounded)
{
  auto const spec = make_spec(8, {16}, 3, 42);
  Model const a(spec), b(spec);
  EXPECT_EQ(a.get_flat_weights(), b.get_flat_weights());
  EXPECT_NE(a.get_flat_weights(), Model(make_spec(8, {16}, 3, 43)).get_flat_weights());

  auto const w    = a.get_flat_weights();
  auto const segs = layer_segments(spec);
  ASSERT_EQ(segs.size(), 4u);
  double const bound0 = std::sqrt(6.0 / (8 + 16));
  for (std::size_t i = 0; i < segs[0].length; ++i)
  {
    EXPECT_LE(std::abs(w[segs[0].offset + i]), bound0);
  }
  for (std::size_t i = 0; i < segs[1].length; ++i)
  {
    EXPECT_EQ(w[segs[1].offset + i], 0.0);
  }
  EXPECT_TRUE(std::equal(w.begin(), w.end(), a.initial_weights().begin()));
}

TEST(ModelTest, ZeroWeightsGiveZeroLogits)
{
  auto const spec  = make_spec(3, {4}, 3);
  auto const n     = parameter_count(spec);
  auto const model = Model::from_weights(spec, std::vector<double>(n, 0.0),
                                         std::vector<double>(n, 0.0));
  auto const out   = model.forward(Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(out, Tensor::zeros({2, 3}));
}

TEST(ModelTest, ForwardRowCount)
{
  Model const model(make_spec(2, {5}, 4));
  for (std::size_t rows : {1u, 3u, 17u})
  {
    auto const out = model.forward(Tensor({rows, 2}, std::vector<double>(rows * 2, 0.5)));
    EXPECT_EQ(out.shape(), (Shape{rows, 4}));
  }
  EXPECT_THROW(model.forward(Tensor::matrix({{1, 2, 3}})), ShapeError);
}

TEST(ModelTest, IdentityLinearModel)
{
  auto const spec  = make_spec(2, {}, 2);
  auto const model = Model::from_weights(spec, {1, 0, 0, 1, 0, 0}, {0, 0, 0, 0, 0, 0});
  EXPECT_EQ(model.forward(Tensor::matrix({{2, 5}})), Tensor::matrix({{2, 5}}));
}

TEST(ModelTest, FlatWeightRoundTrip)
{
  Model       model(make_spec(3, {4}, 2, 7));
  auto const  x      = Tensor::matrix({{0.1, -0.2, 0.3}});
  auto const  before = model.forward(x);
  model.set_flat_weights(model.get_flat_weights());
  EXPECT_EQ(model.forward(x), before);
  EXPECT_THROW(model.set_flat_weights(std::vector<double>(3, 0.0)), ShapeError);
}

TEST(ModelTest, SetWeightsKeepsInitialSnapshot)
{
  auto const spec  = make_spec(1, {}, 2);
  Model      model = Model::from_weights(spec, {0, 0, 0, 0}, {0, 0, 0, 0});
  model.set_flat_weights(std::vector<double>{3, 4, 0, 0});
  EXPECT_EQ(frobenius_distance(model), 5.0);
  EXPECT_EQ(model.get_flat_weights(), (std::vector<double>{3, 4, 0, 0}));
  EXPECT_TRUE(std::all_of(model.initial_weights().begin(), model.initial_weights().end(),
                          [](double v) { return v == 0.0; }));
}

TEST(CheckpointTest, RoundTripIsBitExact)
{
  Model model(make_spec(4, {3, 2}, 3, 9));
  auto  w = model.get_flat_weights();
  w[0] += 1e-17 + 0.1;
  model.set_flat_weights(w);
  auto const bytes = serialize_checkpoint(model, {{"objective", "sam"}});
  auto const back  = parse_checkpoint(bytes);
  EXPECT_EQ(back.model.spec(), model.spec());
  EXPECT_EQ(back.model.get_flat_weights(), model.get_flat_weights());
  EXPECT_TRUE(std::equal(model.initial_weights().begin(), model.initial_weights().end(),
                         back.model.initial_weights().begin()));
  EXPECT_EQ(back.metadata.at("objective"), "sam");
  EXPECT_EQ(serialize_checkpoint(back.model, back.metadata), bytes);
}

TEST(CheckpointTest, RejectsCorruptInput)
{
  Model const model(make_spec(2, {}, 2));
  auto        bytes = serialize_checkpoint(model);
  EXPECT_THROW(parse_checkpoint("NOTLPROBE\n"), FormatError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ck.lpk"), FormatError);
}

}  // namespace
