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

#include "lprobe/analysis.hpp"
#include "lprobe/datagen.hpp"
#include "lprobe/measures.hpp"
#include "lprobe/model.hpp"
#include "lprobe/objectives.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lprobe {

/// Parameters of the [suite] section; shifted domains are generated from them.
struct SuiteParams
{
  std::size_t   num_classes     = 3;
  std::size_t   input_dim       = 16;
  std::uint64_t prototypes_seed = 1;
  std::uint64_t gen_seed        = 2;
  SplitCounts   counts;
  double        noise_sigma     = 1.0;
  std::size_t   shifted_domains = 14;
  double        shift_step      = 0.1;  // radians per domain index
  double        shift_bias_norm = 0.0;  // bias norm of the last domain

  bool operator==(SuiteParams const &) const = default;
};

struct ExperimentParams
{
  std::vector<Objective> objectives = {Objective::kBaseline, Objective::kSam, Objective::kFisher,
                                       Objective::kConsistency};
  std::size_t            seeds      = 8;  // runs use seeds first_seed .. first_seed + seeds - 1
  std::uint64_t          first_seed = 1;
  int                    jobs       = 1;

  bool operator==(ExperimentParams const &) const = default;
};

/**
 * Typed view of a configuration file. Sections: [suite], [model], [train],
 * [measure], [experiment]. Every key has a default; `sections` records which
 * headers appeared in the source text.
 */
struct Config
{
  SuiteParams           suite;
  ModelSpec             model;  // input_dim / num_classes follow the suite
  TrainConfig           train;
  MeasureConfigs        measure;
  ExperimentParams      experiment;
  std::set<std::string> sections;

  bool operator==(Config const &) const = default;
};

/// The defaults table: every tunable with its default value.
Config default_config();

/// Throws ConfigError with the line number and key of the first problem.
Config parse_config(std::string const &text);
Config load_config(std::filesystem::path const &path);

/// Canonical text; parse_config(serialize_config(c)) == c for any valid c with all sections.
std::string serialize_config(Config const &config);

void validate(Config const &config);

/// Throws ConfigError naming `section` when it did not appear in the file.
void require_section(Config const &config, std::string const &section);

SuiteSpec      suite_spec(Config const &config);
ExperimentPlan experiment_plan(Config const &config);

/**
 * Seed precedence: flag, then the LPROBE_SEED value, then the file. Returns
 * the override to apply, if any; a malformed environment value is a ConfigError.
 */
std::optional<std::uint64_t> resolve_seed_override(std::optional<std::uint64_t> flag,
                                                   char const *env_value);

/// Sets the train seed, the model init seed and both measure seeds.
void apply_seed(Config &config, std::uint64_t seed);

}  // namespace lprobe
