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

#include <cmath>
#include <limits>
#include <random>

namespace conn::testing
{

  /// Two states, two inputs, state-dependent g and a non-diagonal R.
  inline OcpDefinition toy2d_definition()
  {
    OcpDefinition d;
    d.id = "toy2d";
    d.state_dim = 2;
    d.input_dim = 2;
    d.f = [](const Vec &x) { return Vec((Vec(2) << x[1], -std::sin(x[0]) - 0.1 * x[1]).finished()); };
    d.df_dx = [](const Vec &x) { return Mat((Mat(2, 2) << 0.0, 1.0, -std::cos(x[0]), -0.1).finished()); };
    d.d2f_dx2 = [](const Vec &x) {
      return MatStack{(Mat(2, 2) << 0.0, 0.0, std::sin(x[0]), 0.0).finished(), Mat::Zero(2, 2)};
    };
    d.g = [](const Vec &x) { return Mat((Mat(2, 2) << 1.0, 0.5 * x[1], x[0], 1.0).finished()); };
    d.dg_dx = [](const Vec &) {
      return MatStack{(Mat(2, 2) << 0.0, 0.0, 1.0, 0.0).finished(), (Mat(2, 2) << 0.0, 0.5, 0.0, 0.0).finished()};
    };
    d.d2g_dx2 = [](const Vec &) {
      return std::vector<MatStack>{{Mat::Zero(2, 2), Mat::Zero(2, 2)}, {Mat::Zero(2, 2), Mat::Zero(2, 2)}};
    };
    d.Q = (Mat(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
    d.R = (Mat(2, 2) << 1.0, 0.3, 0.3, 2.0).finished();
    const double inf = std::numeric_limits<double>::infinity();
    d.u_min = Vec::Constant(2, -inf);
    d.u_max = Vec::Constant(2, inf);
    d.x_target = Vec::Zero(2);
    d.t_final = 2.0;
    d.delta = 0.05;
    return d;
  }

  inline OcpProblem toy2d() { return OcpProblem(toy2d_definition()); }

  inline Vec random_vec(std::mt19937_64 &rng, int n, double lo, double hi)
  {
    std::uniform_real_distribution<double> dist(lo, hi);
    Vec v(n);
    for (int i = 0; i < n; ++i)
      v[i] = dist(rng);
    return v;
  }

  inline Vec scalar(double v) { return Vec::Constant(1, v); }

} // namespace conn::testing
