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

#include "lprobe/dataset.hpp"
#include "lprobe/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lprobe {

/// One input distribution: the anchor distribution rotated by shift_angle and offset by shift_bias.
struct DomainSpec
{
  std::string         name;
  double              shift_angle = 0.0;  // radians, >= 0
  std::vector<double> shift_bias;         // empty means zero
  double              noise_sigma = 1.0;

  bool operator==(DomainSpec const &) const = default;
};

struct SplitCounts
{
  std::size_t train = 2000;
  std::size_t val   = 500;
  std::size_t test  = 500;
  std::size_t eval  = 500;  // per shifted domain

  bool operator==(SplitCounts const &) const = default;
};

/// Everything needed to regenerate a suite bit-for-bit; serialised as the suite manifest.
struct SuiteSpec
{
  std::size_t             num_classes     = 3;
  std::size_t             input_dim       = 16;
  std::uint64_t           prototypes_seed = 1;
  std::uint64_t           gen_seed        = 2;
  SplitCounts             counts;
  DomainSpec              anchor{"anchor", 0.0, {}, 1.0};
  std::vector<DomainSpec> shifted;

  bool operator==(SuiteSpec const &) const = default;
};

/// 1 anchor + 14 shifted domains at angles 0.1, 0.2, ..., 1.4 rad; K=3, d=16.
SuiteSpec default_suite_spec();

/// `count` shifted domains named shift01.. with angles step, 2*step, ...
std::vector<DomainSpec> evenly_shifted_domains(std::size_t count, double angle_step,
                                               double noise_sigma, double bias_norm,
                                               std::size_t input_dim, std::uint64_t seed);

struct AnchorSplits
{
  Dataset train;
  Dataset val;
  Dataset test;
};

struct ShiftedDomain
{
  DomainSpec spec;
  Tensor     rotation;  // d x d orthogonal
  Dataset    eval;
};

struct DomainSuite
{
  SuiteSpec                  spec;
  Tensor                     prototypes;  // K x d, each row of norm 3
  AnchorSplits               anchor;
  std::vector<ShiftedDomain> shifted;
};

void validate(SuiteSpec const &spec);

DomainSuite make_domain_suite(SuiteSpec const &spec);

/**
 * Orthogonal d x d matrix: a seeded pairing of coordinates, each pair
 * rotated by `angle` (Givens). An odd leftover coordinate is fixed.
 */
Tensor givens_rotation(std::size_t dim, double angle, std::uint64_t seed);

/// Class prototypes on the sphere of radius 3.
Tensor make_prototypes(std::size_t num_classes, std::size_t input_dim, std::uint64_t seed);

/**
 * Balanced labels (i mod K, shuffled), features prototype + N(0, sigma^2 I),
 * then x -> R x + bias.
 */
Dataset draw_samples(Tensor const &prototypes, DomainSpec const &domain, Tensor const &rotation,
                     std::size_t count, std::uint64_t seed);

/// Seeds used for a domain's samples and rotation; exposed so tests can redraw them.
/// Split tags mixed into per-domain sample seeds.
enum SplitTag : std::uint64_t
{
  kTrainSplit = 1,
  kValSplit   = 2,
  kTestSplit  = 3,
  kEvalSplit  = 4,
};

std::uint64_t domain_sample_seed(std::uint64_t gen_seed, std::string const &name,
                                 std::uint64_t split);
std::uint64_t domain_rotation_seed(std::uint64_t gen_seed, std::string const &name);

// --- files -------------------------------------------------------------------

/// Rows of d features then an integer label; floats at 17 significant digits.
void    write_csv(std::filesystem::path const &path, Dataset const &data, bool header = true);
Dataset load_csv(std::filesystem::path const &path, bool has_header);
Dataset parse_csv(std::string const &text, bool has_header);

std::string suite_manifest_json(SuiteSpec const &spec);
SuiteSpec   parse_suite_manifest(std::string const &json);

/// manifest.json plus anchor_{train,val,test}.csv and one <name>.csv per shifted domain.
void        write_suite(DomainSuite const &suite, std::filesystem::path const &dir);
DomainSuite load_suite(std::filesystem::path const &dir);

}  // namespace lprobe
