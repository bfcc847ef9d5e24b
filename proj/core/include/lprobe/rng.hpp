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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace lprobe {

/// Mixes a base seed with stream tags (splitmix64 finaliser per tag).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);
/// FNV-1a of a string, for deriving seeds from names.
std::uint64_t hash_name(std::string_view name);

/**
 * Seeded generator with platform-independent distributions.
 *
 * std::mt19937_64's raw output is fixed by the standard but the <random>
 * distributions are not, so the transforms below are spelled out to keep
 * generated data and training runs bit-identical across standard libraries.
 */
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev)
  {
    return mean + stddev * normal();
  }

  template <class T>
  void shuffle(std::vector<T> &items)
  {
    for (std::size_t i = items.size(); i > 1; --i)
    {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 engine_;
  double          spare_     = 0.0;
  bool            has_spare_ = false;
};

}  // namespace lprobe
