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
#include "lprobe/measures.hpp"
#include "lprobe/model.hpp"
#include "lprobe/objectives.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lprobe {

/// Fraction of rows whose argmax logit equals the label; ties go to the lowest class index.
double accuracy_from_logits(Tensor const &logits, std::span<int const> labels);
double accuracy(Model const &model, Dataset const &data);

/// Sample Pearson correlation. Needs >= 3 points and non-constant inputs.
double pearson(std::span<double const> xs, std::span<double const> ys);

enum class Grouping
{
  kPerModel,      // across domains of one trained model (one objective, one seed)
  kPerObjective,  // all seeds of one objective pooled
  kPooled,        // every report
};

std::string_view to_string(Grouping grouping);

inline constexpr std::array<std::string_view, 4> kMeasureNames{"margin", "phi_difference",
                                                               "phi_alpha", "frobenius_distance"};

struct CorrelationResult
{
  std::string           group;    // e.g. "model:baseline-s3", "objective:sam", "pooled:all"
  std::string           measure;  // one of kMeasureNames
  std::optional<double> r;        // absent when undefined (constant input, < 3 rows)
  std::size_t           n        = 0;
  std::size_t           excluded = 0;  // failure-flagged or errored rows left out
  std::string           note;
};

/**
 * Pearson r of each measure against accuracy within every group. Rows whose
 * phi_alpha failed are dropped from that measure only.
 */
std::vector<CorrelationResult> correlate_measures(std::span<MeasureReport const> reports,
                                                  Grouping grouping);

/// group,measure,r,n
std::string correlations_csv(std::span<CorrelationResult const> results);

// --- experiments ---------------------------------------------------------------

struct ExperimentPlan
{
  SuiteSpec                  suite = default_suite_spec();
  ModelSpec                  model;
  std::vector<TrainConfig>   trainings;  // one per objective / hyperparameter variant
  std::vector<std::uint64_t> seeds;
  MeasureConfigs             measures;
  int                        jobs = 1;
};

/// Baseline, SAM, Fisher and consistency with default hyperparameters, seeds 1..8.
ExperimentPlan default_plan();

void        validate(ExperimentPlan const &plan);
std::string plan_json(ExperimentPlan const &plan);

struct RunStatus
{
  std::string   run_id;
  std::string   objective;
  std::uint64_t seed       = 0;
  bool          ok         = false;
  int           best_epoch = 0;
  double        best_val_accuracy = 0.0;
  std::string   message;
};

struct StabilityRow
{
  std::string objective;
  double      mean_accuracy = 0.0;
  double      std_accuracy  = 0.0;  // sample std over seeds of the per-seed mean domain accuracy
  std::size_t seeds         = 0;
};

struct ExperimentBundle
{
  std::vector<MeasureReport>     reports;
  std::vector<CorrelationResult> correlations;
  std::vector<StabilityRow>      stability;
  std::vector<RunStatus>         runs;
  std::vector<std::string>       warnings;
  std::vector<std::string>       histories;  // history CSV text per run, parallel to runs

  bool partial() const;
};

/// Per-objective mean and spread of the per-seed average domain accuracy.
std::vector<StabilityRow> stability_table(std::span<MeasureReport const> reports);
std::string               stability_csv(std::span<StabilityRow const> rows);

using ProgressCallback = std::function<void(RunStatus const &)>;

/**
 * Trains every (training config, seed) pair on the anchor domain and
 * measures it on every shifted domain. Runs execute on up to plan.jobs
 * threads; results are ordered by (config, seed) and do not depend on jobs.
 */
ExperimentBundle run_experiment(ExperimentPlan const &plan, ProgressCallback progress = {});

/**
 * plan.json, reports.csv, correlations.csv, stability.csv, metadata.json
 * and history/<run-id>.csv under `dir`.
 */
void write_bundle(ExperimentBundle const &bundle, ExperimentPlan const &plan,
                  std::filesystem::path const &dir);

}  // namespace lprobe
