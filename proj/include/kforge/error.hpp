// Copyright 2026 The kforge Authors
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

namespace kforge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (annotation tables, maps, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A referenced file is missing or unreadable.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Persisted artifact has the wrong version, a bad checksum or a corrupted body.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Tensor or raster dimensions disagree with what the caller expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kforge
