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

#include "lprobe/tensor.hpp"

#include "lprobe/error.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

namespace lprobe {

std::size_t element_count(Shape const &shape)
{
  std::size_t n = 1;
  for (auto d : shape)
  {
    n *= d;
  }
  return n;
}

std::string to_string(Shape const &shape)
{
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
  {
    if (i != 0)
    {
      out += "x";
    }
    out += std::to_string(shape[i]);
  }
  out += "]";
  return out;
}

Tensor::Tensor()
  : shape_{1}
  , data_(1, 0.0)
{}

Tensor::Tensor(Shape shape, std::vector<double> data)
  : shape_(std::move(shape))
  , data_(std::move(data))
{
  if (shape_.empty())
  {
    throw ShapeError("tensor shape must have at least one dimension");
  }
  for (auto d : shape_)
  {
    if (d == 0)
    {
      throw ShapeError("tensor dimension must be positive, got " + to_string(shape_));
    }
  }
  if (element_count(shape_) != data_.size())
  {
    throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                     std::to_string(data_.size()) + " values");
  }
  for (std::size_t i = 0; i < data_.size(); ++i)
  {
    if (!std::isfinite(data_[i]))
    {
      throw NumericError("non-finite tensor entry at flat index " + std::to_string(i));
    }
  }
}

Tensor Tensor::zeros(Shape shape)
{
  auto const n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value)
{
  return Tensor({1}, {value});
}

Tensor Tensor::vector(std::initializer_list<double> values)
{
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
  std::size_t const r = rows.size();
  std::size_t const c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (auto const &row : rows)
  {
    if (row.size() != c)
    {
      throw ShapeError("ragged matrix literal");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::at(std::size_t r, std::size_t c) const
{
  if (rank() != 2 || r >= shape_[0] || c >= shape_[1])
  {
    throw ShapeError("index (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + to_string(shape_));
  }
  return data_[r * shape_[1] + c];
}

std::size_t Tensor::rows() const
{
  if (rank() != 2)
  {
    throw ShapeError("rows() requires a rank-2 tensor, got " + to_string(shape_));
  }
  return shape_[0];
}

std::size_t Tensor::cols() const
{
  if (rank() != 2)
  {
    throw ShapeError("cols() requires a rank-2 tensor, got " + to_string(shape_));
  }
  return shape_[1];
}

double Tensor::item() const
{
  if (data_.size() != 1)
  {
    throw ShapeError("item() requires a single-element tensor, got " + to_string(shape_));
  }
  return data_[0];
}

bool Tensor::operator==(Tensor const &other) const
{
  if (shape_ != other.shape_ || data_.size() != other.data_.size())
  {
    return false;
  }
  for (std::size_t i = 0; i < data_.size(); ++i)
  {
    if (std::bit_cast<std::uint64_t>(data_[i]) != std::bit_cast<std::uint64_t>(other.data_[i]))
    {
      return false;
    }
  }
  return true;
}

}  // namespace lprobe
