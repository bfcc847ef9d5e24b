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

#include <stdexcept>
#include <string>
#include <utility>

namespace lprobe {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes, wrong vector lengths.
class ShapeError : public Error
{
public:
  using Error::Error;
};

/// A NaN or infinity appeared where a finite value is required.
class NumericError : public Error
{
public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class InvalidArgument : public Error
{
public:
  using Error::Error;
};

/// Malformed input file (CSV, checkpoint, manifest).
class FormatError : public Error
{
public:
  using Error::Error;
};

/// Bad configuration file content; carries the offending line and key when known.
class ConfigError : public InvalidArgument
{
public:
  ConfigError(std::string const &what, int line = 0, std::string key = {})
    : InvalidArgument(what)
    , line_(line)
    , key_(std::move(key))
  {}

  int line() const noexcept
  {
    return line_;
  }
  std::string const &key() const noexcept
  {
    return key_;
  }

private:
  int         line_;
  std::string key_;
};

/// Training loss became non-finite.
class DivergenceError : public Error
{
public:
  DivergenceError(std::string const &what, int epoch, long step)
    : Error(what)
    , epoch_(epoch)
    , step_(step)
  {}

  int epoch() const noexcept
  {
    return epoch_;
  }
  long step() const noexcept
  {
    return step_;
  }

private:
  int  epoch_;
  long step_;
};

}  // namespace lprobe
