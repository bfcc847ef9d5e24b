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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lprobe {

using Shape = std::vector<std::size_t>;

std::size_t element_count(Shape const &shape);
std::string to_string(Shape const &shape);

/**
 * Dense row-major tensor of doubles.
 *
 * Every dimension is positive and every entry is finite; both are checked at
 * construction. Scalars use shape {1}.
 */
class Tensor
{
public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  Shape const &shape() const noexcept
  {
    return shape_;
  }
  std::size_t rank() const noexcept
  {
    return shape_.size();
  }
  std::size_t size() const noexcept
  {
    return data_.size();
  }
  std::span<double const> data() const noexcept
  {
    return data_;
  }
  std::vector<double> const &values() const noexcept
  {
    return data_;
  }

  double operator[](std::size_t i) const
  {
    return data_[i];
  }
  /// Element (r, c) of a rank-2 tensor.
  double at(std::size_t r, std::size_t c) const;

  std::size_t rows() const;
  std::size_t cols() const;

  /// Value of a single-element tensor.
  double item() const;

  /// Bitwise equality of shape and data.
  bool operator==(Tensor const &other) const;

private:
  Shape               shape_;
  std::vector<double> data_;
};

}  // namespace lprobe
