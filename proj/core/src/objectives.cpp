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

#include "lprobe/objectives.hpp"

#include "lprobe/analysis.hpp"
#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace lprobe {
namespace {

double squared_norm(std::span<double const> v)
{
  double s = 0.0;
  for (double x : v)
  {
    s += x * x;
  }
  return s;
}

void require_finite(std::span<double const> v, char const *what)
{
  for (double x : v)
  {
    if (!std::isfinite(x))
    {
      throw NumericError(std::string("non-finite ") + what);
    }
  }
}

}  // namespace

std::string_view to_string(Objective objective)
{
  switch (objective)
  {
  case Objective::kBaseline:
    return "baseline";
  case Objective::kSam:
    return "sam";
  case Objective::kFisher:
    return "fisher";
  case Objective::kConsistency:
    return "consistency";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name)
{
  for (auto o : {Objective::kBaseline, Objective::kSam, Objective::kFisher, Objective::kConsistency})
  {
    if (name == to_string(o))
    {
      return o;
    }
  }
  throw InvalidArgument("unknown objective '" + std::string(name) +
                        "' (expected baseline, sam, fisher or consistency)");
}

// --- optimisers --------------------------------------------------------------

void Sgd::update(std::span<double> weights, std::span<double const> grad)
{
  if (weights.size() != grad.size())
  {
    throw ShapeError("sgd: gradient length mismatch");
  }
  require_finite(grad, "gradient");
  for (std::size_t i = 0; i < weights.size(); ++i)
  {
    weights[i] -= learning_rate_ * grad[i];
  }
}

AdamW::AdamW(std::size_t dimension, AdamWOptions options)
  : options_(options)
  , m_(dimension, 0.0)
  , v_(dimension, 0.0)
{
  if (options_.learning_rate < 0.0 || options_.weight_decay < 0.0 || options_.eps <= 0.0 ||
      options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0)
  {
    throw InvalidArgument("adamw: invalid hyperparameters");
  }
}

void AdamW::update(std::span<double> weights, std::span<double const> grad)
{
  if (weights.size() != m_.size() || grad.size() != m_.size())
  {
    throw ShapeError("adamw: expected " + std::to_string(m_.size()) + " weights and gradients");
  }
  require_finite(grad, "gradient");
  ++steps_;
  auto const  &o   = options_;
  double const bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(steps_));
  double const bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < weights.size(); ++i)
  {
    m_[i] = o.beta1 * m_[i] + (1.0 - o.beta1) * grad[i];
    v_[i] = o.beta2 * v_[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    weights[i] -= o.learning_rate * o.weight_decay * weights[i];
    double const m_hat = m_[i] / bc1;
    double const v_hat = v_[i] / bc2;
    weights[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps);
  }
}

// --- losses ------------------------------------------------------------------

GraphLoss cross_entropy_loss(ModelSpec const &spec, Dataset const &batch)
{
  if (batch.empty())
  {
    throw InvalidArgument("cross-entropy loss needs a nonempty batch");
  }
  if (batch.input_dim() != spec.input_dim)
  {
    throw ShapeError("batch width " + std::to_string(batch.input_dim()) +
                     " does not match model input_dim " + std::to_string(spec.input_dim));
  }
  GraphBuilder b;
  NodeId const x      = b.input("x", {batch.size(), spec.input_dim});
  NodeId const y      = b.input("y", {batch.size()});
  auto const   params = add_parameters(b, spec);
  NodeId const loss   = b.cross_entropy(add_forward(b, spec, params, x), y);
  return GraphLoss(b.build(loss), Bindings{{x, batch.features()}, {y, batch.label_tensor()}},
                   params);
}

GraphLoss consistency_loss_graph(ModelSpec const &spec, Dataset const &batch,
                                 Tensor const &perturbed_features, double lambda_c)
{
  if (batch.empty())
  {
    throw InvalidArgument("consistency loss needs a nonempty batch");
  }
  if (perturbed_features.shape() != batch.features().shape())
  {
    throw ShapeError("perturbed view shape " + to_string(perturbed_features.shape()) +
                     " does not match batch " + to_string(batch.features().shape()));
  }
  if (lambda_c < 0.0)
  {
    throw InvalidArgument("consistency lambda must be >= 0");
  }
  GraphBuilder b;
  Shape const  xs     = {batch.size(), spec.input_dim};
  NodeId const clean  = b.input("x_clean", xs);
  NodeId const noisy  = b.input("x_view", xs);
  NodeId const y      = b.input("y", {batch.size()});
  auto const   params = add_parameters(b, spec);
  NodeId const lc     = add_forward(b, spec, params, clean);
  NodeId const ln     = add_forward(b, spec, params, noisy);
  NodeId const ce     = b.add(b.scale(b.cross_entropy(lc, y), 0.5), b.scale(b.cross_entropy(ln, y), 0.5));
  NodeId const kl     = b.scale(b.kl_divergence(b.softmax(lc), b.softmax(ln)), lambda_c);
  return GraphLoss(b.build(b.add(ce, kl)),
                   Bindings{{clean, batch.features()}, {noisy, perturbed_features},
                            {y, batch.label_tensor()}},
                   params);
}

Tensor gaussian_view(Tensor const &features, double sigma, std::uint64_t seed)
{
  if (sigma < 0.0)
  {
    throw InvalidArgument("view noise sigma must be >= 0");
  }
  if (sigma == 0.0)
  {
    return features;
  }
  Rng                 rng(seed);
  std::vector<double> out = features.values();
  for (auto &x : out)
  {
    x += sigma * rng.normal();
  }
  return Tensor(features.shape(), std::move(out));
}

double consistency_loss(Model const &model, Dataset const &batch, double view_noise_sigma,
                        double lambda_c, std::uint64_t seed)
{
  auto const view = gaussian_view(batch.features(), view_noise_sigma, seed);
  return consistency_loss_graph(model.spec(), batch, view, lambda_c).value(model.weights());
}

double fisher_penalty(WeightLoss const &loss, std::span<double const> weights)
{
  std::vector<double> g(loss.dimension());
  loss.value_and_gradient(weights, g);
  return squared_norm(g);
}

double fisher_penalty(Model const &model, Dataset const &batch)
{
  return fisher_penalty(cross_entropy_loss(model.spec(), batch), model.weights());
}

double fisher_regularized_loss(GraphLoss const &loss, std::span<double const> weights,
                               double lambda, std::span<double> grad)
{
  std::vector<double> g(loss.dimension());
  loss.value_and_gradient(weights, g);
  std::vector<double> hg(loss.dimension());
  double const        value = loss.value_gradient_hvp(weights, g, grad, hg);
  for (std::size_t i = 0; i < grad.size(); ++i)
  {
    grad[i] += 2.0 * lambda * hg[i];
  }
  return value + lambda * squared_norm(g);
}

// --- steps -------------------------------------------------------------------

void adamw_step(Model &model, Dataset const &batch, AdamW &optimizer)
{
  auto const          loss = cross_entropy_loss(model.spec(), batch);
  std::vector<double> w    = model.get_flat_weights();
  std::vector<double> g(w.size());
  loss.value_and_gradient(w, g);
  optimizer.update(w, g);
  model.set_flat_weights(w);
}

double sam_step(std::span<double> weights, WeightLoss const &loss, double rho, Optimizer &base)
{
  if (!(rho > 0.0))
  {
    throw InvalidArgument("sam: rho must be > 0");
  }
  std::vector<double> g(weights.size());
  double const        value = loss.value_and_gradient(weights, g);
  if (!std::isfinite(value))
  {
    throw NumericError("sam: non-finite loss at the current weights");
  }
  require_finite(g, "gradient at the current weights");
  double const norm = std::sqrt(squared_norm(g));
  if (norm < 1e-12)
  {
    base.update(weights, g);
    return value;
  }
  // The ascent point lives in a separate buffer; `weights` itself is only
  // touched by the base update.
  std::vector<double> perturbed(weights.begin(), weights.end());
  for (std::size_t i = 0; i < perturbed.size(); ++i)
  {
    perturbed[i] += rho * g[i] / norm;
  }
  std::vector<double> g_sharp(weights.size());
  double const        sharp_value = loss.value_and_gradient(perturbed, g_sharp);
  if (!std::isfinite(sharp_value))
  {
    throw NumericError("sam: non-finite loss at the perturbed weights");
  }
  require_finite(g_sharp, "gradient at the perturbed weights");
  base.update(weights, g_sharp);
  return value;
}

double sam_step(Model &model, Dataset const &batch, double rho, Optimizer &base)
{
  auto const          loss = cross_entropy_loss(model.spec(), batch);
  std::vector<double> w    = model.get_flat_weights();
  double const        v    = sam_step(w, loss, rho, base);
  model.set_flat_weights(w);
  return v;
}

// --- training ----------------------------------------------------------------

void validate(TrainConfig const &c)
{
  if (c.epochs < 1)
  {
    throw InvalidArgument("epochs must be >= 1");
  }
  if (c.batch_size < 1)
  {
    throw InvalidArgument("batch_size must be >= 1");
  }
  if (!(c.learning_rate >= 0.0) || !(c.weight_decay >= 0.0))
  {
    throw InvalidArgument("learning_rate and weight_decay must be >= 0");
  }
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0) || !(c.eps > 0.0))
  {
    throw InvalidArgument("beta1, beta2 must lie in [0, 1) and eps must be > 0");
  }
  switch (c.objective)
  {
  case Objective::kSam:
    if (!(c.sam_rho > 0.0))
    {
      throw InvalidArgument("sam_rho must be > 0");
    }
    break;
  case Objective::kFisher:
    if (!(c.fisher_lambda >= 0.0))
    {
      throw InvalidArgument("fisher_lambda must be >= 0");
    }
    break;
  case Objective::kConsistency:
    if (!(c.consistency_lambda >= 0.0) || !(c.view_noise_sigma >= 0.0))
    {
      throw InvalidArgument("consistency_lambda and view_noise_sigma must be >= 0");
    }
    break;
  case Objective::kBaseline:
    break;
  }
}

TrainResult train(Model model, AnchorSplits const &anchor, TrainConfig const &config)
{
  validate(config);
  if (anchor.train.empty() || anchor.val.empty())
  {
    throw InvalidArgument("anchor train and validation splits must be nonempty");
  }
  auto const  start = std::chrono::steady_clock::now();
  auto const &spec  = model.spec();

  AdamW optimizer(model.parameter_count(),
                  AdamWOptions{config.learning_rate, config.beta1, config.beta2, config.eps,
                               config.weight_decay});
  std::vector<double> w = model.get_flat_weights();
  std::vector<double> g(w.size());

  TrainResult result{model, {}, 0, 0.0};
  double      best_acc = -1.0;

  std::vector<std::size_t> order(anchor.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch)
  {
    Rng shuffler(derive_seed(config.seed, {0x7368756666ULL, static_cast<std::uint64_t>(epoch)}));
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    long   batches  = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size)
    {
      std::size_t const end = std::min(order.size(), begin + config.batch_size);
      Dataset const     batch =
          anchor.train.subset(std::span<std::size_t const>(order).subspan(begin, end - begin));
      ++step;
      double value = 0.0;
      try
      {
        switch (config.objective)
        {
        case Objective::kBaseline:
          value = cross_entropy_loss(spec, batch).value_and_gradient(w, g);
          optimizer.update(w, g);
          break;
        case Objective::kSam:
          value = sam_step(w, cross_entropy_loss(spec, batch), config.sam_rho, optimizer);
          break;
        case Objective::kFisher:
          value = fisher_regularized_loss(cross_entropy_loss(spec, batch), w,
                                          config.fisher_lambda, g);
          optimizer.update(w, g);
          break;
        case Objective::kConsistency:
        {
          auto const view = gaussian_view(
              batch.features(), config.view_noise_sigma,
              derive_seed(config.seed, {0x76696577ULL, static_cast<std::uint64_t>(step)}));
          value = consistency_loss_graph(spec, batch, view, config.consistency_lambda)
                      .value_and_gradient(w, g);
          optimizer.update(w, g);
          break;
        }
        }
      }
      catch (NumericError const &e)
      {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step) + ": " + e.what(),
                              epoch, step);
      }
      if (!std::isfinite(value))
      {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step) + ": non-finite loss",
                              epoch, step);
      }
      loss_sum += value;
      ++batches;
    }

    model.set_flat_weights(w);
    double const val_acc = accuracy(model, anchor.val);
    result.history.push_back({epoch, loss_sum / static_cast<double>(batches), val_acc});
    if (val_acc > best_acc)
    {
      best_acc          = val_acc;
      result.best_epoch = epoch;
      result.model      = model;
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string history_csv(TrainResult const &result)
{
  std::string out = "epoch,train_loss,val_accuracy\n";
  char        buf[96];
  for (auto const &r : result.history)
  {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_accuracy);
    out += buf;
  }
  return out;
}

void write_history_csv(std::filesystem::path const &path, TrainResult const &result)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << history_csv(result);
  if (!out)
  {
    throw Error("failed writing " + path.string());
  }
}

}  // namespace lprobe
