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

#include <string>
#include <string_view>

namespace conn
{

  /// Shortest decimal text that parses back to the identical double.
  std::string format_double(double v);

  /// Strict parse of a whole token; returns false on trailing garbage or empty input.
  bool parse_double(std::string_view text, double &out);
  bool parse_int(std::string_view text, long long &out);

} // namespace conn
