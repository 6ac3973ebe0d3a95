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

#include "conn/model.hpp"
#include "conn/ocp.hpp"
#include "conn/tpbvp.hpp"

#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace conn
{

  /// Box-constrained minimiser of 1/2 u'Ru + lambda0' g(x) u over [u_min, u_max].
  Vec solve_input_qp(const OcpProblem &problem, const Vec &x, const Vec &lambda0);

  /// Elementwise clip. Throws ArgumentError when the bounds are not ordered.
  Vec saturate(const Vec &u, const Vec &u_min, const Vec &u_max);

  /// One RK4 step of xdot = f(x) + g(x) u with u held over the step.
  Vec plant_step(const OcpProblem &problem, const Vec &x, const Vec &u, double delta);

  enum class DisturbanceMode
  {
    kStateJump,   ///< x <- x + d right after the step that contains the event time
    kInputOffset, ///< plant input u + d for offset_duration seconds from the event time
  };

  struct DisturbanceEvent
  {
    double time = 0.0;
    Vec magnitude;
  };

  class DisturbanceSchedule
  {
  public:
    DisturbanceSchedule() = default;
    /// Throws ArgumentError unless times are strictly increasing and finite.
    explicit DisturbanceSchedule(std::vector<DisturbanceEvent> events,
                                 DisturbanceMode mode = DisturbanceMode::kStateJump,
                                 double offset_duration = 1.0);

    /// +2 at t = 1, 2; -2 at t = 3, 4; +1 at t = 5 (scalar state).
    static DisturbanceSchedule paper();
    /// Parses "t:mag,t:mag,..." for scalar states; "" gives an empty schedule.
    static DisturbanceSchedule parse(std::string_view text);

    /// Throws ArgumentError if an event lies outside [0, t_final] or has the wrong dimension.
    void check(const OcpProblem &problem) const;

    const std::vector<DisturbanceEvent> &events() const { return events_; }
    DisturbanceMode mode() const { return mode_; }
    double offset_duration() const { return offset_duration_; }
    bool empty() const { return events_.empty(); }

  private:
    std::vector<DisturbanceEvent> events_;
    DisturbanceMode mode_ = DisturbanceMode::kStateJump;
    double offset_duration_ = 1.0;
  };

  struct ClosedLoopResult
  {
    Vec times;               ///< N
    Trajectory x_series;     ///< N x p
    Trajectory u_series;     ///< (N-1) x q
    Trajectory lambda0_series; ///< (N-1) x p
    /// N x p: state jumps injected at t_k, or the input offset active over step k.
    Trajectory disturbance_series;
    /// Trapezoidal rule on 1/2 x'Qx plus the exact integral of 1/2 u'Ru for the held inputs.
    double running_cost = 0.0;
    bool diverged = false;
    /// Steps at which the co-state source failed and the previous input was held.
    std::vector<int> failed_steps;

    int steps() const { return static_cast<int>(times.size()); }
  };

  /// Co-state supplied to the loop at step k for the measured state x.
  /// An empty optional means "no prediction", and the previous input is held.
  using CostateSource = std::function<std::optional<Vec>(int k, const Vec &x)>;

  /**
   * Generic receding-horizon loop: co-state from `source`, input from the QP
   * (or the unconstrained law), plant step, disturbance injection. On plant
   * divergence the series are truncated and `diverged` is set.
   */
  ClosedLoopResult run_closed_loop(const OcpProblem &problem, const Vec &x0,
                                   const DisturbanceSchedule &schedule, bool constrained,
                                   const CostateSource &source);

  /// CoNN loop: the first predicted co-state drives the input.
  ClosedLoopResult simulate_closed_loop(const OcpProblem &problem, const ConnModel &model, const Vec &x0,
                                        const DisturbanceSchedule &schedule, bool constrained);

  /// Expert loop that re-solves the full-horizon boundary value problem at every step.
  ClosedLoopResult reference_closed_loop(const OcpProblem &problem, const Vec &x0,
                                         const DisturbanceSchedule &schedule, bool constrained,
                                         const SolverConfig &config = {});

  /// Trapezoidal rule on 1/2 x'Qx plus the exact integral of 1/2 u'Ru for held inputs.
  double running_cost(const OcpProblem &problem, const ClosedLoopResult &result);

  /// 1/2 x'Qx + 1/2 u'Ru at every grid point (u = 0 on the last row).
  Vec stage_costs(const OcpProblem &problem, const ClosedLoopResult &result);

} // namespace conn
