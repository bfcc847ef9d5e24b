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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lprobe {

/// Noise scales tried when sweeping the difference-based sharpness.
inline constexpr std::array<double, 4> kNoiseScaleCandidates{0.001, 0.005, 0.01, 0.02};

struct SharpnessConfig
{
  double        noise_scale   = 0.01;  // sigma_n
  double        ascent_coeff  = 0.05;  // n
  double        radius_lambda = 0.05;  // lambda
  std::size_t   batch_size    = 8;
  std::uint64_t seed          = 0;

  bool operator==(SharpnessConfig const &) const = default;
};

struct AlphaSharpnessConfig
{
  double        loss_target_offset  = 0.1;
  int           ascent_steps        = 10;
  int           binary_search_iters = 40;
  double        alpha_lo            = 1e-6;
  double        alpha_hi            = 10.0;
  std::uint64_t seed                = 0;

  bool operator==(AlphaSharpnessConfig const &) const = default;
};

void validate(SharpnessConfig const &config);
void validate(AlphaSharpnessConfig const &config);

// --- margin ------------------------------------------------------------------

/// Mean over rows of (true-class logit - largest other logit).
double margin_from_logits(Tensor const &logits, std::span<int const> labels);
double margin(Model const &model, Dataset const &data);

// --- difference-based sharpness ----------------------------------------------

/**
 * Gaussian weight noise: each tensor segment gets N(0, (sigma_n * rms)^2)
 * per coordinate, where rms is that segment's root-mean-square weight. An
 * all-zero segment falls back to plain sigma_n.
 */
std::vector<double> sharpness_noise(std::span<double const> weights,
                                    std::span<WeightSegment const> segments, double noise_scale,
                                    std::uint64_t seed);

struct DifferenceSharpness
{
  double              phi;
  double              radius;        // p = lambda * ||w'||
  double              displacement;  // ||w' - w0|| after projection
  bool                projected;
  std::vector<double> perturbed;  // final w'
};

/**
 * Difference-based sharpness with an explicit noise draw:
 *   w = w0 + noise;  w' = w + n * grad L(w);  p = lambda * ||w'||;
 *   if ||w' - w0|| > p, pull w' back onto the sphere of radius p around w0;
 *   phi = L(w') - L(w0).
 */
DifferenceSharpness phi_difference_with_noise(std::span<double const> weights,
                                              WeightLoss const &loss, SharpnessConfig const &config,
                                              std::span<double const> noise);

/// As above with the noise drawn by sharpness_noise(config.noise_scale, config.seed).
double phi_difference(std::span<double const> weights, WeightLoss const &loss,
                      SharpnessConfig const &config);
double phi_difference(Model const &model, WeightLoss const &loss, SharpnessConfig const &config);

// --- alpha sharpness -----------------------------------------------------------

struct AlphaSharpness
{
  std::optional<double> phi;  // absent when the search failed
  double                alpha = 0.0;
  double                target_loss = 0.0;
  std::string           failure;  // empty on success

  bool failed() const noexcept
  {
    return !phi.has_value();
  }
};

/// Largest loss found by sign-gradient ascent inside the box |u_i| <= alpha around `weights`.
double worst_case_loss(std::span<double const> weights, WeightLoss const &loss, double alpha,
                       int ascent_steps, std::uint64_t seed);

/**
 * Binary search for the largest alpha whose worst-case loss stays below
 * L(W) + loss_target_offset, then phi = ||W - W0||^2 / (4 alpha^2).
 * Returns a failure instead of throwing when no alpha in bounds is
 * feasible, when the search pins to either bound, or when the ascent
 * produces a non-finite loss.
 */
AlphaSharpness phi_alpha(std::span<double const> weights, std::span<double const> initial_weights,
                         WeightLoss const &loss, AlphaSharpnessConfig const &config);
AlphaSharpness phi_alpha(Model const &model, WeightLoss const &loss,
                         AlphaSharpnessConfig const &config);

// --- distance ------------------------------------------------------------------

double frobenius_distance(std::span<double const> a, std::span<double const> b);
double frobenius_distance(Model const &model);

// --- reports -------------------------------------------------------------------

struct MeasureConfigs
{
  SharpnessConfig      sharpness;
  AlphaSharpnessConfig alpha;
  /// Extra noise scales for which phi_difference is repeated (empty: no sweep).
  std::vector<double> noise_sweep;

  bool operator==(MeasureConfigs const &) const = default;
};

struct RunLabel
{
  std::string   model_id;
  std::string   objective;
  std::uint64_t seed = 0;
};

struct MeasureReport
{
  std::string           model_id;
  std::string           objective;
  std::uint64_t         seed = 0;
  std::string           domain;
  double                accuracy           = 0.0;
  double                margin             = 0.0;
  double                phi_difference     = 0.0;
  std::optional<double> phi_alpha;
  double                frobenius_distance = 0.0;
  std::vector<double>   phi_difference_sweep;  // parallel to MeasureConfigs::noise_sweep
  std::string           config_hash;
  std::string           error;  // non-empty if this row could not be measured
};

/// Hex digest of the measure configuration, stored with every report.
std::string config_hash(MeasureConfigs const &configs);

/// The fixed batch (configs.sharpness.batch_size rows) that sharpness is measured on.
Dataset sharpness_batch(Dataset const &data, SharpnessConfig const &config);

/**
 * One report per shifted domain: accuracy and margin on the domain's eval
 * set, both sharpness measures on a fixed seeded batch of that set, and the
 * model-level Frobenius distance.
 */
std::vector<MeasureReport> measure_all(Model const &model, DomainSuite const &suite,
                                       MeasureConfigs const &configs, RunLabel const &label);

/// model_id,objective,seed,domain,accuracy,margin,phi_difference,phi_alpha,
/// phi_alpha_failed,frobenius_distance[,phi_difference_sigma_<s>...]
std::string reports_csv(std::span<MeasureReport const> reports,
                        std::span<double const> noise_sweep = {});

}  // namespace lprobe
