/*
 Copyright 2026 The conn-control Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace conn
{

  /// Invalid dimensions, ranges or option values supplied by the caller.
  class ArgumentError : public std::invalid_argument
  {
  public:
    using std::invalid_argument::invalid_argument;
  };

  /// Numerical integration produced non-finite values.
  class DivergenceError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// A batch computation could not reach its required success rate.
  class ConvergenceError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// Malformed dataset/model/result file.
  class ParseError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  /// File carries a format version this build cannot read.
  class FormatVersionError : public ParseError
  {
  public:
    using ParseError::ParseError;
  };

  class IoError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

} // namespace conn
