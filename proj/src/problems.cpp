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

#include "conn/problems.hpp"

#include "conn/errors.hpp"

#include <limits>

namespace conn
{

  namespace
  {

    OcpDefinition scalar_base(std::string id)
    {
      const double inf = std::numeric_limits<double>::infinity();
      OcpDefinition d;
      d.id = std::move(id);
      d.state_dim = 1;
      d.input_dim = 1;
      d.g = [](const Vec &) { return Mat::Ones(1, 1); };
      d.dg_dx = [](const Vec &) { return MatStack{Mat::Zero(1, 1)}; };
      d.d2g_dx2 = [](const Vec &) { return std::vector<MatStack>{MatStack{Mat::Zero(1, 1)}}; };
      d.Q = Mat::Identity(1, 1);
      d.R = Mat::Identity(1, 1);
      d.u_min = Vec::Constant(1, -inf);
      d.u_max = Vec::Constant(1, inf);
      d.x_target = Vec::Zero(1);
      d.t_final = 10.0;
      d.delta = 0.05;
      return d;
    }

  } // namespace

  OcpProblem paper1d()
  {
    OcpDefinition d = scalar_base("paper1d");
    d.f = [](const Vec &x) { return Vec::Constant(1, -x[0] * x[0] + x[0]); };
    d.df_dx = [](const Vec &x) { return Mat::Constant(1, 1, -2.0 * x[0] + 1.0); };
    d.d2f_dx2 = [](const Vec &) { return MatStack{Mat::Constant(1, 1, -2.0)}; };
    return OcpProblem(std::move(d));
  }

  OcpProblem linear1d()
  {
    OcpDefinition d = scalar_base("linear1d");
    d.f = [](const Vec &x) { return Vec(x); };
    d.df_dx = [](const Vec &) { return Mat::Identity(1, 1); };
    d.d2f_dx2 = [](const Vec &) { return MatStack{Mat::Zero(1, 1)}; };
    return OcpProblem(std::move(d));
  }

  OcpProblem make_problem(std::string_view id)
  {
    if (id == "paper1d")
      return paper1d();
    if (id == "linear1d")
      return linear1d();
    throw ArgumentError("unknown problem '" + std::string(id) + "'");
  }

  std::vector<std::string> registered_problems() { return {"paper1d", "linear1d"}; }

} // namespace conn
