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

#include "conn/results_io.hpp"

#include "conn/errors.hpp"
#include "conn/numfmt.hpp"
#include "text_io.hpp"

#include <fstream>
#include <sstream>

namespace conn
{

  namespace
  {

    void header_group(std::ostream &os, const char *name, int dim)
    {
      for (int i = 0; i < dim; ++i)
      {
        os << ',' << name;
        if (dim > 1)
          os << '_' << i;
      }
    }

    void row_group(std::ostream &os, const Trajectory &m, Eigen::Index k, int dim)
    {
      for (int i = 0; i < dim; ++i)
      {
        os << ',';
        if (k < m.rows())
          os << format_double(m(k, i));
      }
    }

  } // namespace

  std::string result_csv(const OcpProblem &problem, const ClosedLoopResult &result)
  {
    const int p = problem.state_dim();
    const int q = problem.input_dim();
    if (result.x_series.cols() != p || result.u_series.cols() != q)
      throw ArgumentError("result_csv: result does not match the problem dimensions");
    const Vec stage = stage_costs(problem, result);
    std::ostringstream os;
    os << 't';
    header_group(os, "x", p);
    header_group(os, "lambda0", p);
    header_group(os, "u", q);
    header_group(os, "d", p);
    os << ",stage_cost\n";
    for (int k = 0; k < result.steps(); ++k)
    {
      os << format_double(result.times[k]);
      row_group(os, result.x_series, k, p);
      row_group(os, result.lambda0_series, k, p);
      row_group(os, result.u_series, k, q);
      row_group(os, result.disturbance_series, k, p);
      os << ',' << format_double(stage[k]) << '\n';
    }
    return os.str();
  }

  void write_result_csv(const OcpProblem &problem, const ClosedLoopResult &result, const std::filesystem::path &path)
  {
    const std::string text = result_csv(problem, result);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text))
      throw IoError("cannot write " + path.string());
  }

  ClosedLoopResult read_result_csv(const OcpProblem &problem, const std::filesystem::path &path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("cannot open " + path.string());
    detail::LineReader reader(in, path.string());
    const int p = problem.state_dim();
    const int q = problem.input_dim();
    const std::size_t columns = 1 + 3 * static_cast<std::size_t>(p) + q + 1;
    const std::string header_line = reader.require("header");
    const auto header = detail::split(header_line, ',');
    if (header.size() != columns || header.front() != "t" || header.back() != "stage_cost")
      reader.fail("unexpected result header for a problem with p=" + std::to_string(p) + ", q=" + std::to_string(q));

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (reader.next(line))
    {
      if (line.empty())
        continue;
      auto cells = detail::split(line, ',');
      if (cells.size() != columns)
        reader.fail("expected " + std::to_string(columns) + " columns");
      rows.emplace_back(cells.begin(), cells.end());
    }
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n < 2)
      throw ParseError(path.string() + ": need at least two rows");

    ClosedLoopResult r;
    r.times.resize(n);
    r.x_series.resize(n, p);
    r.lambda0_series.resize(n - 1, p);
    r.u_series.resize(n - 1, q);
    r.disturbance_series.resize(n, p);
    auto cell = [&](Eigen::Index k, std::size_t c) {
      double v = 0.0;
      if (!parse_double(rows[k][c], v))
        throw ParseError(path.string() + ": row " + std::to_string(k + 2) + ", column " + std::to_string(c + 1) +
                         ": bad number '" + rows[k][c] + "'");
      return v;
    };
    for (Eigen::Index k = 0; k < n; ++k)
    {
      std::size_t c = 0;
      r.times[k] = cell(k, c++);
      for (int i = 0; i < p; ++i)
        r.x_series(k, i) = cell(k, c++);
      for (int i = 0; i < p; ++i, ++c)
        if (k + 1 < n)
          r.lambda0_series(k, i) = cell(k, c);
      for (int i = 0; i < q; ++i, ++c)
        if (k + 1 < n)
          r.u_series(k, i) = cell(k, c);
      for (int i = 0; i < p; ++i)
        r.disturbance_series(k, i) = cell(k, c++);
    }
    r.running_cost = running_cost(problem, r);
    return r;
  }

} // namespace conn
