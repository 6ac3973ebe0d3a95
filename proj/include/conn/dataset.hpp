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

#include "conn/tpbvp.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace conn
{

  /// Optimal state/co-state trajectories for a grid of initial states.
  struct Dataset
  {
    std::string problem_id;
    double delta = 0.0;
    int steps = 0; ///< N, samples per trajectory
    std::vector<TrajectoryPair> entries;

    int count() const { return static_cast<int>(entries.size()); } ///< M
    int state_dim() const { return entries.empty() ? 0 : static_cast<int>(entries.front().x0.size()); }

    /// Throws ArgumentError unless all entries are converged, length N, and sorted by unique x0.
    void validate() const;
  };

  struct GenerationReport
  {
    std::vector<double> failed_x0;
  };

  /**
   * Solves the boundary value problem for `count` evenly spaced initial states
   * on [x0_min, x0_max] (both endpoints included). Only converged solutions
   * are kept; failures are listed in `report`. Throws ConvergenceError when
   * fewer than 90% converge. Scalar-state problems only.
   */
  Dataset generate_dataset(const OcpProblem &problem, double x0_min, double x0_max, int count,
                           const SolverConfig &solver = {}, GenerationReport *report = nullptr);

  /// Contiguous slice of a trajectory pair starting at step k.
  struct Window
  {
    int k = 0;
    Trajectory x_window;      ///< n x p
    Trajectory lambda_window; ///< n x p
  };

  /// The N - n windows k = 0..N-n-1 of length n. Throws ArgumentError when n >= N or n < 1.
  std::vector<Window> windows(const TrajectoryPair &pair, int n);

  constexpr int kDatasetFormatVersion = 1;

  void save_dataset(const Dataset &ds, const std::filesystem::path &path);
  Dataset load_dataset(const std::filesystem::path &path);

} // namespace conn
