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

#include "conn/errors.hpp"

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace conn::detail
{

  inline std::vector<std::string_view> split(std::string_view line, char sep)
  {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true)
    {
      const std::size_t pos = line.find(sep, start);
      out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos)
        break;
      start = pos + 1;
    }
    return out;
  }

  /// Line-oriented reader that tags every error with file name and line number.
  class LineReader
  {
  public:
    LineReader(std::istream &in, std::string name) : in_(in), name_(std::move(name)) {}

    bool next(std::string &line)
    {
      if (!std::getline(in_, line))
        return false;
      ++number_;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      return true;
    }

    [[noreturn]] void fail(const std::string &what) const
    {
      throw ParseError(name_ + ":" + std::to_string(number_) + ": " + what);
    }

    std::string require(const std::string &context)
    {
      std::string line;
      if (!next(line))
        throw ParseError(name_ + ": unexpected end of file (" + context + ")");
      return line;
    }

    /// Reads "key: value" and returns value.
    std::string header_value(const std::string &key)
    {
      const std::string line = require("header field '" + key + "'");
      const std::string prefix = key + ": ";
      if (line.rfind(prefix, 0) != 0)
        fail("expected header field '" + key + "'");
      return line.substr(prefix.size());
    }

    const std::string &name() const { return name_; }

  private:
    std::istream &in_;
    std::string name_;
    int number_ = 0;
  };

} // namespace conn::detail
