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

#include "lprobe/autodiff.hpp"
#include "lprobe/error.hpp"
#include "lprobe/graph.hpp"
#include "lprobe/tensor.hpp"

#include "support/properties.hpp"
#include "support/random_graphs.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace lprobe;

TEST(TensorTest, RejectsBadShapesAndValues)
{
  EXPECT_THROW(Tensor({2, 0}, {}), ShapeError);
  EXPECT_THROW(Tensor({2}, {1.0}), ShapeError);
  EXPECT_THROW(Tensor({1}, {NAN}), NumericError);
  EXPECT_THROW(Tensor({1}, {INFINITY}), NumericError);
  EXPECT_EQ(Tensor().shape(), (Shape{1}));
  EXPECT_EQ(Tensor().item(), 0.0);
}

TEST(TensorTest, MatrixAccess)
{
  auto const m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::vector({1, 2}).item(), ShapeError);
}

TEST(EvaluateTest, MatMul)
{
  GraphBuilder b;
  auto const   x = b.input("x", {2, 2});
  auto const   w = b.parameter("w", {2, 1});
  auto const   g = b.build(b.matmul(x, w));
  auto const   out =
      evaluate(g, {{x, Tensor::matrix({{1, 2}, {3, 4}})}, {w, Tensor::matrix({{1}, {1}})}});
  EXPECT_EQ(out, Tensor::matrix({{3}, {7}}));
}

TEST(EvaluateTest, Relu)
{
  GraphBuilder b;
  auto const   x   = b.input("x", {3});
  auto const   g   = b.build(b.relu(x));
  EXPECT_EQ(evaluate(g, {{x, Tensor::vector({-1, 0, 2})}}), Tensor::vector({0, 0, 2}));
}

TEST(EvaluateTest, SoftmaxOfEqualLogitsIsUniform)
{
  GraphBuilder b;
  auto const   x = b.input("x", {2});
  auto const   g = b.build(b.softmax(x));
  EXPECT_EQ(evaluate(g, {{x, Tensor::vector({0, 0})}}), Tensor::vector({0.5, 0.5}));
}

TEST(EvaluateTest, MissingBindingNamesTheNode)
{
  GraphBuilder b;
  auto const   x = b.input("features", {2});
  auto const   g = b.build(b.sum(x));
  try
  {
    evaluate(g, {});
    FAIL();
  }
  catch (InvalidArgument const &e)
  {
    EXPECT_NE(std::string(e.what()).find("features"), std::string::npos);
  }
}

TEST(EvaluateTest, NonFiniteIntermediateThrows)
{
  GraphBuilder b;
  auto const   x = b.input("x", {2});
  auto const   g = b.build(b.sum(b.log(x)));
  EXPECT_THROW(evaluate(g, {{x, Tensor::vector({0.0, 1.0})}}), NumericError);
}

TEST(GraphBuilderTest, ShapeChecks)
{
  GraphBuilder b;
  auto const   a = b.input("a", {2, 3});
  auto const   c = b.input("c", {2, 3});
  EXPECT_THROW(b.matmul(a, c), ShapeError);
  EXPECT_THROW(b.add(a, b.input("d", {2})), ShapeError);
  EXPECT_NO_THROW(b.add(a, b.input("e", {3})));
  EXPECT_THROW(b.cross_entropy(a, b.input("y", {3})), ShapeError);
}

TEST(GradientTest, SquareAtThree)
{
  GraphBuilder b;
  auto const   w  = b.parameter("w", {1});
  auto const   g  = b.build(b.sum(b.square(w)));
  auto const   gr = gradient(g, {{w, Tensor::scalar(3.0)}}, std::vector<NodeId>{w});
  EXPECT_EQ(gr.at(w).item(), 6.0);
}

TEST(GradientTest, SoftmaxCrossEntropyAtZero)
{
  GraphBuilder b;
  auto const   z  = b.parameter("z", {1, 2});
  auto const   y  = b.input("y", {1});
  auto const   g  = b.build(b.cross_entropy(z, y));
  auto const   gr = gradient(g, {{z, Tensor::matrix({{0, 0}})}, {y, Tensor::vector({0})}},
                             std::vector<NodeId>{z});
  EXPECT_DOUBLE_EQ(gr.at(z).at(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(gr.at(z).at(0, 1), 0.5);
}

TEST(GradientTest, ConstantGraphGivesZeros)
{
  GraphBuilder b;
  auto const   x = b.input("x", {3});
  auto const   w = b.parameter("w", {2, 2});
  auto const   g = b.build(b.sum(x));
  Bindings     bind{{x, Tensor::vector({1, 2, 3})}, {w, Tensor::matrix({{1, 2}, {3, 4}})}};
  EXPECT_EQ(gradient(g, bind, std::vector<NodeId>{w}).at(w), Tensor::zeros({2, 2}));
  EXPECT_EQ(finite_difference_gradient(g, bind, std::vector<NodeId>{w}, 1e-4).at(w),
            Tensor::zeros({2, 2}));
}

TEST(GradientTest, RejectsNonScalarOutputAndNonLeaf)
{
  GraphBuilder b;
  auto const   w = b.parameter("w", {2});
  auto const   r = b.relu(w);
  auto const   g = b.build(r);
  EXPECT_THROW(gradient(g, {{w, Tensor::vector({1, 2})}}, std::vector<NodeId>{w}), InvalidArgument);
  auto const g2 = b.build(b.sum(r));
  EXPECT_THROW(gradient(g2, {{w, Tensor::vector({1, 2})}}, std::vector<NodeId>{r}),
               InvalidArgument);
}

TEST(FiniteDifferenceTest, QuadraticIsExact)
{
  GraphBuilder b;
  auto const   w  = b.parameter("w", {1});
  auto const   g  = b.build(b.sum(b.square(w)));
  auto const   fd = finite_difference_gradient(g, {{w, Tensor::scalar(3.0)}},
                                               std::vector<NodeId>{w}, 1e-4);
  EXPECT_NEAR(fd.at(w).item(), 6.0, 1e-6);
  EXPECT_THROW(finite_difference_gradient(g, {{w, Tensor::scalar(3.0)}}, std::vector<NodeId>{w}, 0.0),
               InvalidArgument);
}

TEST(FiniteDifferenceTest, RandomGraphsMatchReverseMode)
{
  std::set<OpKind> kinds;
  for (std::uint64_t s = 0; s < 100; ++s)
  {
    auto const g = proptest::make_random_graph(s);
    kinds.insert(g.kinds.begin(), g.kinds.end());
    EXPECT_LE(proptest::gradient_relative_error(g, 1e-4), 1e-4) << "seed " << s;
  }
  EXPECT_EQ(kinds.size(), 15u);
}

TEST(HessianVectorTest, MatchesFiniteDifferenceOfGradient)
{
  for (std::uint64_t s = 0; s < 20; ++s)
  {
    auto const  g = proptest::make_random_graph(500 + s);
    Rng         rng(s);
    GradientMap dir;
    for (auto id : g.wrt)
    {
      dir[id] = proptest::random_tensor(rng, g.bindings.at(id).shape(), 1.0);
    }
    auto const hv = hessian_vector_product(g.graph, g.bindings, g.wrt, dir);
    double const h = 1e-5;
    Bindings    plus = g.bindings;
    Bindings    minus = g.bindings;
    for (auto id : g.wrt)
    {
      std::vector<double> p(g.bindings.at(id).values()), m = p;
      for (std::size_t i = 0; i < p.size(); ++i)
      {
        p[i] += h * dir.at(id)[i];
        m[i] -= h * dir.at(id)[i];
      }
      plus[id]  = Tensor(g.bindings.at(id).shape(), p);
      minus[id] = Tensor(g.bindings.at(id).shape(), m);
    }
    auto const gp = gradient(g.graph, plus, g.wrt);
    auto const gm = gradient(g.graph, minus, g.wrt);
    for (auto id : g.wrt)
    {
      for (std::size_t i = 0; i < dir.at(id).size(); ++i)
      {
        double const fd = (gp.at(id)[i] - gm.at(id)[i]) / (2 * h);
        EXPECT_NEAR(hv.hessian_vector.at(id)[i], fd, 1e-5 * (1 + std::abs(fd))) << "seed " << s;
      }
    }
    EXPECT_DOUBLE_EQ(hv.value, evaluate(g.graph, g.bindings).item());
  }
}

TEST(PropertyTest, KlOfDistributionWithItselfIsZero)
{
  auto const r = proptest::check_kl_self_zero(1000, 11);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

TEST(PropertyTest, SoftmaxRowsSumToOne)
{
  auto const r = proptest::check_softmax_rows(1000, 12);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

}  // namespace
