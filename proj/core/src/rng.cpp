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

#include "lprobe/rng.hpp"

#include <cmath>
#include <numbers>

namespace lprobe {
namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags)
{
  std::uint64_t s = splitmix64(base);
  for (auto t : tags)
  {
    s = splitmix64(s ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  }
  return s;
}

std::uint64_t hash_name(std::string_view name)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name)
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double Rng::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi)
{
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t n)
{
  // Reject the biased tail so every residue is equally likely.
  std::uint64_t const limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t       x;
  do
  {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal()
{
  if (has_spare_)
  {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do
  {
    u1 = uniform();
  } while (u1 <= 0.0);
  double const u2     = uniform();
  double const radius = std::sqrt(-2.0 * std::log(u1));
  double const angle  = 2.0 * std::numbers::pi * u2;
  spare_              = radius * std::sin(angle);
  has_spare_          = true;
  return radius * std::cos(angle);
}

}  // namespace lprobe
