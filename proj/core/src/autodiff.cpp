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

#include <algorithm>
#include <cmath>
#include <vector>

namespace lprobe {
namespace {

constexpr double kProbabilityFloor = 1e-12;

// First-order forward-mode number. Running the reverse sweep on these with
// the tangent seeded along v yields H·v in the tangent of each adjoint.
struct Dual
{
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value)  // NOLINT(google-explicit-constructor)
    : v(value)
  {}
  Dual(double value, double tangent)
    : v(value)
    , d(tangent)
  {}

  Dual &operator+=(Dual o)
  {
    v += o.v;
    d += o.d;
    return *this;
  }
};

inline Dual operator+(Dual a, Dual b)
{
  return {a.v + b.v, a.d + b.d};
}
inline Dual operator-(Dual a, Dual b)
{
  return {a.v - b.v, a.d - b.d};
}
inline Dual operator-(Dual a)
{
  return {-a.v, -a.d};
}
inline Dual operator*(Dual a, Dual b)
{
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
inline Dual operator/(Dual a, Dual b)
{
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
inline Dual exp(Dual a)
{
  double const e = std::exp(a.v);
  return {e, a.d * e};
}
inline Dual log(Dual a)
{
  return {std::log(a.v), a.d / a.v};
}
inline Dual sqrt(Dual a)
{
  double const s = std::sqrt(a.v);
  return {s, s > 0.0 ? a.d / (2.0 * s) : 0.0};
}

inline double primal(double x)
{
  return x;
}
inline double primal(Dual x)
{
  return x.v;
}
inline bool finite(double x)
{
  return std::isfinite(x);
}
inline bool finite(Dual x)
{
  return std::isfinite(x.v) && std::isfinite(x.d);
}

template <class T>
using Buffer = std::vector<T>;

template <class T>
class Engine
{
public:
  Engine(ComputeGraph const &graph)
    : graph_(graph)
    , values_(graph.size())
  {}

  void bind(NodeId id, std::span<double const> data, std::span<double const> tangent = {})
  {
    auto &buf = values_[id];
    buf.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
    {
      if constexpr (std::is_same_v<T, Dual>)
      {
        buf[i] = Dual(data[i], tangent.empty() ? 0.0 : tangent[i]);
      }
      else
      {
        buf[i] = data[i];
      }
    }
  }

  void forward()
  {
    auto const &nodes = graph_.nodes();
    for (NodeId id = 0; id < nodes.size(); ++id)
    {
      auto const &node = nodes[id];
      if (!node.is_leaf())
      {
        values_[id].assign(element_count(node.shape), T(0.0));
        compute(id, node);
      }
      for (auto const &x : values_[id])
      {
        if (!finite(x))
        {
          throw NumericError("non-finite value produced at node " + graph_.describe(id));
        }
      }
    }
  }

  Buffer<T> const &value(NodeId id) const
  {
    return values_[id];
  }

  void backward()
  {
    auto const &nodes = graph_.nodes();
    adjoints_.assign(nodes.size(), {});
    for (NodeId id = 0; id < nodes.size(); ++id)
    {
      adjoints_[id].assign(values_[id].size(), T(0.0));
    }
    adjoints_[graph_.output()][0] = T(1.0);
    for (NodeId id = nodes.size(); id-- > 0;)
    {
      if (!nodes[id].is_leaf())
      {
        propagate(id, nodes[id]);
      }
    }
  }

  Buffer<T> const &adjoint(NodeId id) const
  {
    return adjoints_[id];
  }

private:
  void compute(NodeId id, Node const &node)
  {
    auto &out = values_[id];
    switch (node.kind)
    {
    case OpKind::kMatMul:
    {
      auto const &a = values_[node.inputs[0]];
      auto const &b = values_[node.inputs[1]];
      auto const &sa = graph_.node(node.inputs[0]).shape;
      std::size_t const m = sa[0], k = sa[1], n = node.shape[1];
      for (std::size_t i = 0; i < m; ++i)
      {
        for (std::size_t p = 0; p < k; ++p)
        {
          T const aip = a[i * k + p];
          for (std::size_t j = 0; j < n; ++j)
          {
            out[i * n + j] += aip * b[p * n + j];
          }
        }
      }
      break;
    }
    case OpKind::kAddBroadcast:
    {
      auto const &a  = values_[node.inputs[0]];
      auto const &b  = values_[node.inputs[1]];
      std::size_t nb = b.size();
      for (std::size_t i = 0; i < out.size(); ++i)
      {
        out[i] = a[i] + b[i % nb];
      }
      break;
    }
    case OpKind::kRelu:
    {
      auto const &a = values_[node.inputs[0]];
      for (std::size_t i = 0; i < out.size(); ++i)
      {
        out[i] = primal(a[i]) > 0.0 ? a[i] : T(0.0);
      }
      break;
    }
    case OpKind::kSoftmax:
    {
      auto const &a    = values_[node.inputs[0]];
      std::size_t cols = node.shape.back();
      for (std::size_t r = 0; r * cols < out.size(); ++r)
      {
        softmax_row(&a[r * cols], &out[r * cols], cols);
      }
      break;
    }
    case OpKind::kLog:
    {
      using std::log;
      auto const &a = values_[node.inputs[0]];
      for (std::size_t i = 0; i < out.size(); ++i)
      {
        if (!(primal(a[i]) > 0.0))
        {
          throw NumericError("log of non-positive value at node " + graph_.describe(id));
        }
        out[i] = log(a[i]);
      }
      break;
    }
    case OpKind::kNegate:
    {
      auto const &a = values_[node.inputs[0]];
      for (std::size_t i = 0; i < out.size(); ++i)
      {
        out[i] = -a[i];
      }
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean:
    {
      auto const &a   = values_[node.inputs[0]];
      T           acc = 0.0;
      for (auto const &x : a)
      {
        acc += x;
      }
      out[0] = node.kind == OpKind::kMean ? acc / T(static_cast<double>(a.size())) : acc;
      break;
    }
    case OpKind::kScale:
    {
      auto const &a = values_[node.inputs[0]];
      for (std::size_t i = 0; i < out.size(); ++i)
      {
        out[i] = a[i] * T(node.factor);
      }
      break;
    }
    case OpKind::kSquare:
    {
      auto const &a = values_[node.inputs[0]];
      for (std::size_t i = 0; i < out.size(); ++i)
      {
        out[i] = a[i] * a[i];
      }
      break;
    }
    case OpKind::kL2Norm:
    {
      using std::sqrt;
      auto const &a   = values_[node.inputs[0]];
      T           acc = 0.0;
      for (auto const &x : a)
      {
        acc += x * x;
      }
      out[0] = sqrt(acc);
      break;
    }
    case OpKind::kCrossEntropy:
    {
      using std::exp;
      using std::log;
      auto const &logits = values_[node.inputs[0]];
      auto const &labels = values_[node.inputs[1]];
      std::size_t rows   = labels.size();
      std::size_t cols   = logits.size() / rows;
      T           total  = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
      {
        std::size_t const y   = label_at(node, labels, r, cols);
        T const          *row = &logits[r * cols];
        T                 m   = row[0];
        for (std::size_t c = 1; c < cols; ++c)
        {
          if (primal(row[c]) > primal(m))
          {
            m = row[c];
          }
        }
        T s = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
        {
          s += exp(row[c] - m);
        }
        total += m + log(s) - row[y];
      }
      out[0] = total / T(static_cast<double>(rows));
      break;
    }
    case OpKind::kKlDivergence:
    {
      using std::log;
      auto const &p     = values_[node.inputs[0]];
      auto const &q     = values_[node.inputs[1]];
      auto const &shape = graph_.node(node.inputs[0]).shape;
      std::size_t rows  = shape.size() == 2 ? shape[0] : 1;
      T           total = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
      {
        total += p[i] * (log(floored(p[i])) - log(floored(q[i])));
      }
      out[0] = total / T(static_cast<double>(rows));
      break;
    }
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
    }
  }

  void propagate(NodeId id, Node const &node)
  {
    auto const &g = adjoints_[id];
    switch (node.kind)
    {
    case OpKind::kMatMul:
    {
      auto const &a  = values_[node.inputs[0]];
      auto const &b  = values_[node.inputs[1]];
      auto       &ga = adjoints_[node.inputs[0]];
      auto       &gb = adjoints_[node.inputs[1]];
      auto const &sa = graph_.node(node.inputs[0]).shape;
      std::size_t const m = sa[0], k = sa[1], n = node.shape[1];
      for (std::size_t i = 0; i < m; ++i)
      {
        for (std::size_t p = 0; p < k; ++p)
        {
          T acc = 0.0;
          T const aip = a[i * k + p];
          for (std::size_t j = 0; j < n; ++j)
          {
            T const gij = g[i * n + j];
            acc += gij * b[p * n + j];
            gb[p * n + j] += aip * gij;
          }
          ga[i * k + p] += acc;
        }
      }
      break;
    }
    case OpKind::kAddBroadcast:
    {
      auto       &ga = adjoints_[node.inputs[0]];
      auto       &gb = adjoints_[node.inputs[1]];
      std::size_t nb = gb.size();
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        ga[i] += g[i];
        gb[i % nb] += g[i];
      }
      break;
    }
    case OpKind::kRelu:
    {
      auto const &a  = values_[node.inputs[0]];
      auto       &ga = adjoints_[node.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        if (primal(a[i]) > 0.0)
        {
          ga[i] += g[i];
        }
      }
      break;
    }
    case OpKind::kSoftmax:
    {
      auto const &y    = values_[id];
      auto       &ga   = adjoints_[node.inputs[0]];
      std::size_t cols = node.shape.back();
      for (std::size_t r = 0; r * cols < y.size(); ++r)
      {
        T dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
        {
          dot += g[r * cols + c] * y[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c)
        {
          ga[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
        }
      }
      break;
    }
    case OpKind::kLog:
    {
      auto const &a  = values_[node.inputs[0]];
      auto       &ga = adjoints_[node.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        ga[i] += g[i] / a[i];
      }
      break;
    }
    case OpKind::kNegate:
    {
      auto &ga = adjoints_[node.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        ga[i] += -g[i];
      }
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean:
    {
      auto &ga   = adjoints_[node.inputs[0]];
      T     each = node.kind == OpKind::kMean ? g[0] / T(static_cast<double>(ga.size())) : g[0];
      for (auto &x : ga)
      {
        x += each;
      }
      break;
    }
    case OpKind::kScale:
    {
      auto &ga = adjoints_[node.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        ga[i] += g[i] * T(node.factor);
      }
      break;
    }
    case OpKind::kSquare:
    {
      auto const &a  = values_[node.inputs[0]];
      auto       &ga = adjoints_[node.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i)
      {
        ga[i] += T(2.0) * a[i] * g[i];
      }
      break;
    }
    case OpKind::kL2Norm:
    {
      auto const &a    = values_[node.inputs[0]];
      auto       &ga   = adjoints_[node.inputs[0]];
      T const     norm = values_[id][0];
      if (primal(norm) > 0.0)
      {
        T const coeff = g[0] / norm;
        for (std::size_t i = 0; i < a.size(); ++i)
        {
          ga[i] += coeff * a[i];
        }
      }
      break;
    }
    case OpKind::kCrossEntropy:
    {
      auto const &logits = values_[node.inputs[0]];
      auto const &labels = values_[node.inputs[1]];
      auto       &gl     = adjoints_[node.inputs[0]];
      std::size_t rows   = labels.size();
      std::size_t cols   = logits.size() / rows;
      T const     coeff  = g[0] / T(static_cast<double>(rows));
      Buffer<T>   prob(cols);
      for (std::size_t r = 0; r < rows; ++r)
      {
        std::size_t const y = label_at(node, labels, r, cols);
        softmax_row(&logits[r * cols], prob.data(), cols);
        for (std::size_t c = 0; c < cols; ++c)
        {
          T const indicator = c == y ? T(1.0) : T(0.0);
          gl[r * cols + c] += coeff * (prob[c] - indicator);
        }
      }
      break;
    }
    case OpKind::kKlDivergence:
    {
      using std::log;
      auto const &p     = values_[node.inputs[0]];
      auto const &q     = values_[node.inputs[1]];
      auto       &gp    = adjoints_[node.inputs[0]];
      auto       &gq    = adjoints_[node.inputs[1]];
      auto const &shape = graph_.node(node.inputs[0]).shape;
      std::size_t rows  = shape.size() == 2 ? shape[0] : 1;
      T const     coeff = g[0] / T(static_cast<double>(rows));
      for (std::size_t i = 0; i < p.size(); ++i)
      {
        bool const p_live = primal(p[i]) >= kProbabilityFloor;
        bool const q_live = primal(q[i]) >= kProbabilityFloor;
        T          dp     = log(floored(p[i])) - log(floored(q[i]));
        if (p_live)
        {
          dp += T(1.0);
        }
        gp[i] += coeff * dp;
        if (q_live)
        {
          gq[i] += -coeff * p[i] / q[i];
        }
      }
      break;
    }
    case OpKind::kInput:
    case OpKind::kParameter:
      break;
    }
  }

  static T floored(T x)
  {
    return primal(x) >= kProbabilityFloor ? x : T(kProbabilityFloor);
  }

  static void softmax_row(T const *in, T *out, std::size_t cols)
  {
    using std::exp;
    T m = in[0];
    for (std::size_t c = 1; c < cols; ++c)
    {
      if (primal(in[c]) > primal(m))
      {
        m = in[c];
      }
    }
    T s = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
    {
      out[c] = exp(in[c] - m);
      s += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c)
    {
      out[c] = out[c] / s;
    }
  }

  std::size_t label_at(Node const &node, Buffer<T> const &labels, std::size_t r,
                       std::size_t cols) const
  {
    double const raw = primal(labels[r]);
    if (raw < 0.0 || raw >= static_cast<double>(cols) || raw != std::floor(raw))
    {
      throw InvalidArgument("label " + std::to_string(raw) + " in row " + std::to_string(r) +
                            " is not a class index in [0, " + std::to_string(cols) +
                            ") at node " + graph_.describe(node.inputs[1]));
    }
    return static_cast<std::size_t>(raw);
  }

  ComputeGraph const    &graph_;
  std::vector<Buffer<T>> values_;
  std::vector<Buffer<T>> adjoints_;
};

void check_bindings(ComputeGraph const &graph, Bindings const &bindings)
{
  for (auto leaf : graph.leaves())
  {
    auto it = bindings.find(leaf);
    if (it == bindings.end())
    {
      throw InvalidArgument("no binding for leaf node " + graph.describe(leaf));
    }
    if (it->second.shape() != graph.node(leaf).shape)
    {
      throw ShapeError("binding for node " + graph.describe(leaf) + " has shape " +
                       to_string(it->second.shape()) + ", expected " +
                       to_string(graph.node(leaf).shape));
    }
  }
}

void check_wrt(ComputeGraph const &graph, std::span<NodeId const> wrt)
{
  if (!graph.has_scalar_output())
  {
    throw InvalidArgument("gradient requires a scalar output, output node " +
                          graph.describe(graph.output()) + " has shape " +
                          to_string(graph.node(graph.output()).shape));
  }
  for (auto id : wrt)
  {
    if (id >= graph.size())
    {
      throw InvalidArgument("gradient requested for absent node id " + std::to_string(id));
    }
    if (!graph.node(id).is_leaf())
    {
      throw InvalidArgument("gradient requested for non-leaf node " + graph.describe(id));
    }
  }
}

template <class T>
void bind_all(Engine<T> &engine, ComputeGraph const &graph, Bindings const &bindings)
{
  for (auto leaf : graph.leaves())
  {
    engine.bind(leaf, bindings.at(leaf).data());
  }
}

}  // namespace

Tensor evaluate(ComputeGraph const &graph, Bindings const &bindings)
{
  check_bindings(graph, bindings);
  Engine<double> engine(graph);
  bind_all(engine, graph, bindings);
  engine.forward();
  auto const out = graph.output();
  return Tensor(graph.node(out).shape, engine.value(out));
}

ValueAndGradient value_and_gradient(ComputeGraph const &graph, Bindings const &bindings,
                                    std::span<NodeId const> wrt)
{
  check_bindings(graph, bindings);
  check_wrt(graph, wrt);
  Engine<double> engine(graph);
  bind_all(engine, graph, bindings);
  engine.forward();
  engine.backward();
  ValueAndGradient result{engine.value(graph.output())[0], {}};
  for (auto id : wrt)
  {
    result.gradient.insert_or_assign(id, Tensor(graph.node(id).shape, engine.adjoint(id)));
  }
  return result;
}

GradientMap gradient(ComputeGraph const &graph, Bindings const &bindings,
                     std::span<NodeId const> wrt)
{
  return value_and_gradient(graph, bindings, wrt).gradient;
}

GradientMap finite_difference_gradient(ComputeGraph const &graph, Bindings const &bindings,
                                       std::span<NodeId const> wrt, double h)
{
  if (!(h > 0.0))
  {
    throw InvalidArgument("finite-difference step must be positive");
  }
  check_bindings(graph, bindings);
  check_wrt(graph, wrt);
  GradientMap out;
  Bindings    probe = bindings;
  for (auto id : wrt)
  {
    Tensor const        base = bindings.at(id);
    std::vector<double> grad(base.size());
    std::vector<double> shifted = base.values();
    for (std::size_t i = 0; i < shifted.size(); ++i)
    {
      double const x0 = shifted[i];
      shifted[i]      = x0 + h;
      probe.insert_or_assign(id, Tensor(base.shape(), shifted));
      double const up = evaluate(graph, probe).item();
      shifted[i]      = x0 - h;
      probe.insert_or_assign(id, Tensor(base.shape(), shifted));
      double const down = evaluate(graph, probe).item();
      shifted[i]        = x0;
      grad[i]           = (up - down) / (2.0 * h);
    }
    probe.insert_or_assign(id, base);
    out.insert_or_assign(id, Tensor(base.shape(), std::move(grad)));
  }
  return out;
}

HessianVectorResult hessian_vector_product(ComputeGraph const &graph, Bindings const &bindings,
                                           std::span<NodeId const> wrt,
                                           GradientMap const &direction)
{
  check_bindings(graph, bindings);
  check_wrt(graph, wrt);
  Engine<Dual> engine(graph);
  for (auto leaf : graph.leaves())
  {
    auto const &value = bindings.at(leaf);
    bool const  seeded = std::find(wrt.begin(), wrt.end(), leaf) != wrt.end();
    if (seeded)
    {
      auto it = direction.find(leaf);
      if (it == direction.end() || it->second.shape() != value.shape())
      {
        throw ShapeError("direction for node " + graph.describe(leaf) +
                         " is missing or has the wrong shape");
      }
      engine.bind(leaf, value.data(), it->second.data());
    }
    else
    {
      engine.bind(leaf, value.data());
    }
  }
  engine.forward();
  engine.backward();

  HessianVectorResult result{engine.value(graph.output())[0].v, {}, {}};
  for (auto id : wrt)
  {
    auto const         &adj = engine.adjoint(id);
    std::vector<double> g(adj.size());
    std::vector<double> hv(adj.size());
    for (std::size_t i = 0; i < adj.size(); ++i)
    {
      g[i]  = adj[i].v;
      hv[i] = adj[i].d;
    }
    result.gradient.insert_or_assign(id, Tensor(graph.node(id).shape, std::move(g)));
    result.hessian_vector.insert_or_assign(id, Tensor(graph.node(id).shape, std::move(hv)));
  }
  return result;
}

}  // namespace lprobe
