// Copyright 2026 The PSIC Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace psic {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image height/width not a multiple of the total downsampling factor.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Two arrays that must agree in shape do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented domain (bad scale factor, index, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable dataset, manifest, image or checkpoint file.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A training loss became NaN or infinite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// An optimizer was asked to update a parameter marked frozen.
class FrozenParameterError : public Error {
 public:
  using Error::Error;
};

/// Fewer than one baseline-correct sample: the attack success rate has no denominator.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class RangeCoderError : public Error {
 public:
  enum class Kind { kSymbolOutOfSupport, kTruncated, kBadTable, kCorrupt };

  RangeCoderError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class ContainerError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kBadVersion,
    kModelMismatch,
    kLambdaMismatch,
    kBadDimensions,
    kLengthCorrupt,
    kPayloadCorrupt,
  };

  ContainerError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace psic
