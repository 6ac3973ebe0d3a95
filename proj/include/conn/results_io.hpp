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

#include "conn/control.hpp"

#include <filesystem>
#include <string>

namespace conn
{

  /**
   * Result CSV, one row per grid point:
   *   t, x..., lambda0..., u..., d..., stage_cost
   * lambda0 and u are empty on the last row. Vector columns are suffixed
   * with _i when the dimension exceeds one.
   */
  std::string result_csv(const OcpProblem &problem, const ClosedLoopResult &result);
  void write_result_csv(const OcpProblem &problem, const ClosedLoopResult &result,
                        const std::filesystem::path &path);

  /// Reads the columns back; running_cost is recomputed from x and u with the problem weights.
  ClosedLoopResult read_result_csv(const OcpProblem &problem, const std::filesystem::path &path);

} // namespace conn
