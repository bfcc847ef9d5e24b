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

#include "lprobe/analysis.hpp"
#include "lprobe/datagen.hpp"
#include "lprobe/error.hpp"
#include "lprobe/objectives.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace {

using namespace lprobe;
namespace fs = std::filesystem;

fs::path temp_dir(std::string const &name)
{
  auto const p = fs::temp_directory_path() / ("lprobe_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SuiteSpec small_spec()
{
  SuiteSpec s;
  s.input_dim = 8;
  s.counts    = {200, 50, 50, 60};
  s.shifted   = evenly_shifted_domains(3, 0.2, 1.0, 0.5, s.input_dim, s.gen_seed);
  return s;
}

TEST(DatagenTest, DefaultSuiteShape)
{
  auto const spec = default_suite_spec();
  EXPECT_EQ(spec.num_classes, 3u);
  EXPECT_EQ(spec.input_dim, 16u);
  EXPECT_EQ(spec.shifted.size(), 14u);
  EXPECT_EQ(spec.counts, (SplitCounts{2000, 500, 500, 500}));
  for (std::size_t m = 0; m < 14; ++m)
  {
    EXPECT_NEAR(spec.shifted[m].shift_angle, 0.1 * double(m + 1), 1e-15);
  }
}

TEST(DatagenTest, RotationIsOrthogonal)
{
  for (std::size_t d : {2u, 3u, 8u, 16u})
  {
    for (double angle : {0.0, 0.1, 0.7, 1.4, 3.0})
    {
      auto const r = givens_rotation(d, angle, 17);
      for (std::size_t i = 0; i < d; ++i)
      {
        for (std::size_t j = 0; j < d; ++j)
        {
          double dot = 0.0;
          for (std::size_t k = 0; k < d; ++k)
          {
            dot += r.at(k, i) * r.at(k, j);
          }
          EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-12);
        }
      }
    }
  }
}

TEST(DatagenTest, ZeroShiftMatchesAnchorDistributionDraw)
{
  SuiteSpec spec = small_spec();
  spec.shifted   = {DomainSpec{"same", 0.0, {}, 1.0}};
  auto const suite = make_domain_suite(spec);
  auto const direct =
      draw_samples(suite.prototypes, spec.anchor, givens_rotation(spec.input_dim, 0.0, 0),
                   spec.counts.eval, domain_sample_seed(spec.gen_seed, "same", kEvalSplit));
  EXPECT_EQ(suite.shifted[0].eval, direct);
}

TEST(DatagenTest, SuiteInvariants)
{
  auto const suite = make_domain_suite(small_spec());
  EXPECT_EQ(suite.anchor.train.size(), 200u);
  EXPECT_EQ(suite.anchor.val.size(), 50u);
  EXPECT_EQ(suite.anchor.test.size(), 50u);
  for (std::size_t k = 0; k < 3; ++k)
  {
    double n = 0.0;
    for (std::size_t j = 0; j < 8; ++j)
    {
      n += suite.prototypes.at(k, j) * suite.prototypes.at(k, j);
    }
    EXPECT_NEAR(std::sqrt(n), 3.0, 1e-12);
  }
  for (auto const &d : suite.shifted)
  {
    EXPECT_EQ(d.eval.size(), 60u);
    for (int y : d.eval.labels())
    {
      EXPECT_TRUE(y >= 0 && y < 3);
    }
  }
  EXPECT_FALSE(suite.anchor.train == suite.anchor.val);
}

TEST(DatagenTest, RegenerationIsBitIdentical)
{
  auto const a = make_domain_suite(small_spec());
  auto const b = make_domain_suite(small_spec());
  EXPECT_EQ(a.prototypes, b.prototypes);
  EXPECT_EQ(a.anchor.train, b.anchor.train);
  for (std::size_t i = 0; i < a.shifted.size(); ++i)
  {
    EXPECT_EQ(a.shifted[i].eval, b.shifted[i].eval);
  }
}

TEST(DatagenTest, ValidationRejectsBadSpecs)
{
  auto spec = small_spec();
  spec.shifted.push_back(spec.shifted.front());
  EXPECT_THROW(validate(spec), InvalidArgument);
  spec            = small_spec();
  spec.shifted[0].shift_angle = -0.1;
  EXPECT_THROW(validate(spec), InvalidArgument);
  spec            = small_spec();
  spec.num_classes = 1;
  EXPECT_THROW(validate(spec), InvalidArgument);
  spec             = small_spec();
  spec.anchor.shift_angle = 0.3;
  EXPECT_THROW(validate(spec), InvalidArgument);
}

TEST(DatagenTest, AccuracyDoesNotIncreaseWithShift)
{
  SuiteSpec spec;
  spec.num_classes = 3;
  spec.input_dim   = 8;
  spec.counts      = {2000, 500, 500, 3000};
  spec.shifted.clear();
  for (double theta : {0.1, 0.3, 0.6, 0.9, 1.2})
  {
    char name[16];
    std::snprintf(name, sizeof name, "t%.1f", theta);
    spec.shifted.push_back({name, theta, {}, 1.0});
  }
  auto const suite = make_domain_suite(spec);
  ModelSpec  ms;
  ms.input_dim   = 8;
  ms.num_classes = 3;
  ms.hidden_dims = {};
  TrainConfig tc;
  tc.seed          = 3;
  auto const model = train(Model(ms), suite.anchor, tc).model;
  double     prev  = 1.0;
  for (auto const &d : suite.shifted)
  {
    double const acc = accuracy(model, d.eval);
    EXPECT_LE(acc, prev) << d.spec.name;
    prev = acc;
  }
}

TEST(CsvTest, ParsesExample)
{
  auto const d = parse_csv("1.0,2.0,0\n3.0,4.0,1", false);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.input_dim(), 2u);
  EXPECT_EQ(d.num_classes(), 2u);
  EXPECT_EQ(d.features(), Tensor::matrix({{1, 2}, {3, 4}}));
}

TEST(CsvTest, ErrorsNameTheRow)
{
  EXPECT_THROW(parse_csv("", false), FormatError);
  try
  {
    parse_csv("1,2,0\n1,x,1\n", false);
    FAIL();
  }
  catch (FormatError const &e)
  {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW(parse_csv("1,2,0\n1,1\n", false), FormatError);
  EXPECT_THROW(parse_csv("1,2,-1\n", false), FormatError);
  auto const dir = temp_dir("csv_empty");
  std::ofstream(dir / "e.csv").close();
  EXPECT_THROW(load_csv(dir / "e.csv", false), FormatError);
}

TEST(CsvTest, RoundTripIsLossless)
{
  auto const dir   = temp_dir("csv_rt");
  auto const suite = make_domain_suite(small_spec());
  write_csv(dir / "a.csv", suite.anchor.train);
  auto const back = load_csv(dir / "a.csv", true);
  EXPECT_EQ(back.features(), suite.anchor.train.features());
  EXPECT_EQ(back.labels(), suite.anchor.train.labels());
}

TEST(SuiteFilesTest, ManifestAndSuiteRoundTrip)
{
  auto const spec = small_spec();
  EXPECT_EQ(parse_suite_manifest(suite_manifest_json(spec)), spec);
  auto const dir   = temp_dir("suite_rt");
  auto const suite = make_domain_suite(spec);
  write_suite(suite, dir);
  auto const back = load_suite(dir);
  EXPECT_EQ(back.spec, spec);
  EXPECT_EQ(back.anchor.val, suite.anchor.val);
  ASSERT_EQ(back.shifted.size(), suite.shifted.size());
  EXPECT_EQ(back.shifted[2].eval, suite.shifted[2].eval);
  EXPECT_THROW(parse_suite_manifest("{\"format\": \"other\"}"), FormatError);
}

}  // namespace
