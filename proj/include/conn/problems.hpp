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

#include "conn/ocp.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace conn
{

  /// xdot = -x^2 + x + u, Q = R = 1, x_target = 0, t_final = 10, delta = 0.05, unbounded input.
  OcpProblem paper1d();

  /// xdot = x + u, Q = R = 1; the infinite-horizon co-state is lambda = (1 + sqrt 2) x.
  OcpProblem linear1d();

  /// Looks up a registered problem by name ("paper1d", "linear1d").
  OcpProblem make_problem(std::string_view id);

  std::vector<std::string> registered_problems();

} // namespace conn
