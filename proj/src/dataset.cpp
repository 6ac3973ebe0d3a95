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

#include "conn/dataset.hpp"

#include "conn/errors.hpp"
#include "conn/numfmt.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace conn
{

  void Dataset::validate() const
  {
    const int p = state_dim();
    for (std::size_t i = 0; i < entries.size(); ++i)
    {
      const TrajectoryPair &e = entries[i];
      if (!e.converged)
        throw ArgumentError("Dataset: entry " + std::to_string(i) + " is not converged");
      if (e.x_traj.rows() != steps || e.lambda_traj.rows() != steps || e.x_traj.cols() != p ||
          e.lambda_traj.cols() != p || e.x0.size() != p)
        throw ArgumentError("Dataset: entry " + std::to_string(i) + " has the wrong shape");
      if (i > 0 && !(entries[i - 1].x0[0] < e.x0[0]))
        throw ArgumentError("Dataset: entries must be sorted by unique x0");
    }
  }

  Dataset generate_dataset(const OcpProblem &problem, double x0_min, double x0_max, int count,
                           const SolverConfig &solver, GenerationReport *report)
  {
    if (count < 2)
      throw ArgumentError("generate_dataset: count must be at least 2");
    if (!(x0_min < x0_max))
      throw ArgumentError("generate_dataset: x0_min must be below x0_max");
    if (problem.state_dim() != 1)
      throw ArgumentError("generate_dataset: scalar initial-state grids need a 1-D problem");

    std::vector<double> grid(count);
    const double step = (x0_max - x0_min) / (count - 1);
    for (int i = 0; i < count; ++i)
      grid[i] = i + 1 == count ? x0_max : x0_min + i * step;

    const double target = problem.x_target()[0];
    std::vector<int> order(count);
    for (int i = 0; i < count; ++i)
      order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(grid[a] - target) < std::abs(grid[b] - target);
    });
    std::vector<Vec> chain;
    chain.reserve(count);
    for (int i : order)
      chain.push_back(Vec::Constant(1, grid[i]));

    std::vector<TrajectoryPair> solved = continuation_solve(problem, chain, solver);

    Dataset ds;
    ds.problem_id = problem.id();
    ds.delta = problem.delta();
    ds.steps = problem.steps();
    GenerationReport local;
    for (TrajectoryPair &pair : solved)
    {
      if (pair.converged)
        ds.entries.push_back(std::move(pair));
      else
        local.failed_x0.push_back(pair.x0[0]);
    }
    std::sort(ds.entries.begin(), ds.entries.end(),
              [](const TrajectoryPair &a, const TrajectoryPair &b) { return a.x0[0] < b.x0[0]; });
    std::sort(local.failed_x0.begin(), local.failed_x0.end());
    if (report)
      *report = local;
    if (10 * ds.count() < 9 * count)
    {
      std::ostringstream os;
      os << "generate_dataset: only " << ds.count() << " of " << count << " boundary value problems converged";
      throw ConvergenceError(os.str());
    }
    return ds;
  }

  std::vector<Window> windows(const TrajectoryPair &pair, int n)
  {
    const auto total = static_cast<int>(pair.x_traj.rows());
    if (n < 1 || n >= total)
      throw ArgumentError("windows: horizon n must satisfy 1 <= n < N");
    if (pair.lambda_traj.rows() != total)
      throw ArgumentError("windows: state and co-state trajectories differ in length");
    std::vector<Window> out;
    out.reserve(total - n);
    for (int k = 0; k < total - n; ++k)
      out.push_back({k, pair.x_traj.middleRows(k, n), pair.lambda_traj.middleRows(k, n)});
    return out;
  }

  // ---------------------------------------------------------------------------
  // Text format
  //
  //   # conn dataset
  //   format_version: 1
  //   problem_id: paper1d
  //   delta: 0.05
  //   N: 201
  //   M: 101
  //   p: 1
  //   entry 0 residual=... iterations=...
  //   k,t,x0,lambda0
  //   0,0,-5,-60.41...
  //   ...
  // ---------------------------------------------------------------------------

  void save_dataset(const Dataset &ds, const std::filesystem::path &path)
  {
    ds.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("save_dataset: cannot open " + path.string());
    const int p = ds.state_dim();
    out << "# conn dataset\n";
    out << "format_version: " << kDatasetFormatVersion << '\n';
    out << "problem_id: " << ds.problem_id << '\n';
    out << "delta: " << format_double(ds.delta) << '\n';
    out << "N: " << ds.steps << '\n';
    out << "M: " << ds.count() << '\n';
    out << "p: " << p << '\n';
    for (int i = 0; i < ds.count(); ++i)
    {
      const TrajectoryPair &e = ds.entries[i];
      out << "entry " << i << " residual=" << format_double(e.residual_norm)
          << " iterations=" << e.newton_iterations << '\n';
      out << "k,t";
      for (int j = 0; j < p; ++j)
        out << ",x" << j;
      for (int j = 0; j < p; ++j)
        out << ",lambda" << j;
      out << '\n';
      for (int k = 0; k < ds.steps; ++k)
      {
        out << k << ',' << format_double(k * ds.delta);
        for (int j = 0; j < p; ++j)
          out << ',' << format_double(e.x_traj(k, j));
        for (int j = 0; j < p; ++j)
          out << ',' << format_double(e.lambda_traj(k, j));
        out << '\n';
      }
    }
    if (!out)
      throw IoError("save_dataset: write failed for " + path.string());
  }

  namespace
  {

    using detail::LineReader;
    using detail::split;

    long long header_int(LineReader &reader, const std::string &key)
    {
      long long v = 0;
      if (!parse_int(reader.header_value(key), v))
        reader.fail("header field '" + key + "' is not an integer");
      return v;
    }

  } // namespace

  Dataset load_dataset(const std::filesystem::path &path)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw IoError("load_dataset: cannot open " + path.string());
    LineReader reader(in, path.string());

    if (reader.require("magic") != "# conn dataset")
      reader.fail("not a conn dataset file");
    const long long version = header_int(reader, "format_version");
    if (version != kDatasetFormatVersion)
      throw FormatVersionError(path.string() + ": dataset format version " + std::to_string(version) +
                               " is not supported (expected " + std::to_string(kDatasetFormatVersion) + ")");

    Dataset ds;
    ds.problem_id = reader.header_value("problem_id");
    if (!parse_double(reader.header_value("delta"), ds.delta) || !(ds.delta > 0.0))
      reader.fail("header field 'delta' must be a positive number");
    const long long steps = header_int(reader, "N");
    const long long count = header_int(reader, "M");
    const long long p = header_int(reader, "p");
    if (steps < 2 || count < 0 || p < 1)
      reader.fail("header values out of range");
    ds.steps = static_cast<int>(steps);

    for (long long i = 0; i < count; ++i)
    {
      const std::string context = "entry " + std::to_string(i);
      const std::string head = reader.require(context);
      const auto fields = split(head, ' ');
      long long index = -1;
      if (fields.size() != 4 || fields[0] != "entry" || !parse_int(fields[1], index) || index != i ||
          fields[2].rfind("residual=", 0) != 0 || fields[3].rfind("iterations=", 0) != 0)
        reader.fail("malformed header of " + context);
      TrajectoryPair e;
      long long iters = 0;
      if (!parse_double(fields[2].substr(9), e.residual_norm) || !parse_int(fields[3].substr(11), iters))
        reader.fail("malformed header of " + context);
      e.newton_iterations = static_cast<int>(iters);
      e.converged = true;

      reader.require(context + " column header");
      e.x_traj.resize(steps, p);
      e.lambda_traj.resize(steps, p);
      for (long long k = 0; k < steps; ++k)
      {
        const std::string where = context + ", record k=" + std::to_string(k);
        const std::string line = reader.require(where);
        const auto cols = split(line, ',');
        if (static_cast<long long>(cols.size()) != 2 + 2 * p)
          reader.fail(where + ": expected " + std::to_string(2 + 2 * p) + " fields");
        long long kk = -1;
        double t = 0.0;
        if (!parse_int(cols[0], kk) || kk != k || !parse_double(cols[1], t))
          reader.fail(where + ": bad step index or time");
        for (long long j = 0; j < p; ++j)
        {
          if (!parse_double(cols[2 + j], e.x_traj(k, j)) ||
              !parse_double(cols[2 + p + j], e.lambda_traj(k, j)))
            reader.fail(where + ": bad number");
        }
      }
      e.x0 = e.x_traj.row(0).transpose();
      ds.entries.push_back(std::move(e));
    }
    std::string extra;
    while (reader.next(extra))
    {
      if (!extra.empty())
        reader.fail("unexpected trailing content");
    }
    try
    {
      ds.validate();
    }
    catch (const ArgumentError &e)
    {
      throw ParseError(path.string() + ": " + e.what());
    }
    return ds;
  }

} // namespace conn
