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

#include "lprobe/datagen.hpp"
#include "lprobe/dataset.hpp"
#include "lprobe/model.hpp"
#include "lprobe/weight_loss.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace lprobe {

enum class Objective
{
  kBaseline,
  kSam,
  kFisher,
  kConsistency,
};

std::string_view to_string(Objective objective);
/// Accepts baseline, sam, fisher, consistency.
Objective parse_objective(std::string_view name);

// --- optimisers --------------------------------------------------------------

class Optimizer
{
public:
  virtual ~Optimizer() = default;
  /// Applies one update to `weights` given `grad`.
  virtual void update(std::span<double> weights, std::span<double const> grad) = 0;
};

class Sgd : public Optimizer
{
public:
  explicit Sgd(double learning_rate)
    : learning_rate_(learning_rate)
  {}
  void update(std::span<double> weights, std::span<double const> grad) override;

private:
  double learning_rate_;
};

struct AdamWOptions
{
  double learning_rate = 1e-2;
  double beta1         = 0.9;
  double beta2         = 0.999;
  double eps           = 1e-8;
  double weight_decay  = 0.01;
};

/**
 * Adam with decoupled weight decay: w <- w - lr*wd*w, then the
 * bias-corrected adaptive step. Moments start at zero.
 */
class AdamW : public Optimizer
{
public:
  AdamW(std::size_t dimension, AdamWOptions options);
  void update(std::span<double> weights, std::span<double const> grad) override;

  long steps() const noexcept
  {
    return steps_;
  }
  AdamWOptions const &options() const noexcept
  {
    return options_;
  }

private:
  AdamWOptions        options_;
  std::vector<double> m_;
  std::vector<double> v_;
  long                steps_ = 0;
};

// --- losses ------------------------------------------------------------------

/// Mean cross-entropy of the model on `batch`, as a function of the flat weights.
GraphLoss cross_entropy_loss(ModelSpec const &spec, Dataset const &batch);

/**
 * Two-view consistency loss: mean over samples of
 * -1/2 log p(y|x) - 1/2 log p(y|x') + lambda_c * KL(p(.|x) || p(.|x')).
 */
GraphLoss consistency_loss_graph(ModelSpec const &spec, Dataset const &batch,
                                 Tensor const &perturbed_features, double lambda_c);

/// x + N(0, sigma^2) per entry; sigma = 0 returns x unchanged.
Tensor gaussian_view(Tensor const &features, double sigma, std::uint64_t seed);

/// Value of the consistency loss for the model's current weights.
double consistency_loss(Model const &model, Dataset const &batch, double view_noise_sigma,
                        double lambda_c, std::uint64_t seed);

/// Squared L2 norm of the mean gradient of `loss` at `weights`.
double fisher_penalty(WeightLoss const &loss, std::span<double const> weights);
double fisher_penalty(Model const &model, Dataset const &batch);

/**
 * L(w) + lambda * ||grad L(w)||^2 and its gradient grad L + 2 lambda H grad L.
 * The Hessian term is the exact Hessian-vector product.
 */
double fisher_regularized_loss(GraphLoss const &loss, std::span<double const> weights,
                               double lambda, std::span<double> grad);

// --- steps -------------------------------------------------------------------

/// Cross-entropy gradient on `batch` fed to `optimizer`. Throws NumericError on a non-finite gradient.
void adamw_step(Model &model, Dataset const &batch, AdamW &optimizer);

/**
 * One sharpness-aware step: g = grad L(w), e = rho g/||g||, g' = grad L(w+e),
 * then `base` updates w with g'. Falls back to g when ||g|| < 1e-12.
 * Returns L(w) before the update.
 */
double sam_step(std::span<double> weights, WeightLoss const &loss, double rho, Optimizer &base);
double sam_step(Model &model, Dataset const &batch, double rho, Optimizer &base);

// --- training ----------------------------------------------------------------

struct TrainConfig
{
  Objective     objective          = Objective::kBaseline;
  int           epochs             = 15;
  std::size_t   batch_size         = 32;
  double        learning_rate      = 1e-2;
  double        weight_decay       = 0.01;
  double        beta1              = 0.9;
  double        beta2              = 0.999;
  double        eps                = 1e-8;
  std::uint64_t seed               = 0;
  double        sam_rho            = 0.5;
  double        fisher_lambda      = 0.1;
  double        consistency_lambda = 1.0;
  double        view_noise_sigma   = 0.1;

  bool operator==(TrainConfig const &) const = default;
};

void validate(TrainConfig const &config);

struct EpochRecord
{
  int    epoch;
  double train_loss;
  double val_accuracy;

  bool operator==(EpochRecord const &) const = default;
};

struct TrainResult
{
  Model                    model;  // weights of the selected checkpoint
  std::vector<EpochRecord> history;
  int                      best_epoch   = 0;
  double                   wall_seconds = 0.0;
};

/**
 * Trains on anchor.train only, evaluating anchor.val after every epoch and
 * keeping the best-validation weights (ties go to the earliest epoch).
 * Throws DivergenceError if the loss becomes non-finite.
 */
TrainResult train(Model model, AnchorSplits const &anchor, TrainConfig const &config);

/// epoch,train_loss,val_accuracy
void        write_history_csv(std::filesystem::path const &path, TrainResult const &result);
std::string history_csv(TrainResult const &result);

}  // namespace lprobe
