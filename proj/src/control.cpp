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

#include "conn/control.hpp"

#include "conn/errors.hpp"
#include "conn/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace conn
{

  Vec saturate(const Vec &u, const Vec &u_min, const Vec &u_max)
  {
    if (u.size() != u_min.size() || u.size() != u_max.size())
      throw ArgumentError("saturate: dimension mismatch");
    if ((u_min.array() > u_max.array()).any())
      throw ArgumentError("saturate: u_min must not exceed u_max");
    return u.cwiseMax(u_min).cwiseMin(u_max);
  }

  Vec solve_input_qp(const OcpProblem &problem, const Vec &x, const Vec &lambda0)
  {
    if (problem.r_is_diagonal())
      return saturate(unconstrained_control(problem, x, lambda0), problem.u_min(), problem.u_max());

    // Coordinate descent on 1/2 u'Ru + c'u; converges for any SPD R.
    const Mat &R = problem.R();
    const Vec c = problem.g(x).transpose() * lambda0;
    const Vec &lo = problem.u_min();
    const Vec &hi = problem.u_max();
    Vec u = saturate(unconstrained_control(problem, x, lambda0), lo, hi);
    constexpr int kMaxSweeps = 100000;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep)
    {
      for (Eigen::Index i = 0; i < u.size(); ++i)
      {
        const double rest = R.row(i).dot(u) - R(i, i) * u[i];
        u[i] = std::clamp(-(c[i] + rest) / R(i, i), lo[i], hi[i]);
      }
      const Vec grad = R * u + c;
      const Vec projected = (u - grad).cwiseMax(lo).cwiseMin(hi) - u;
      if (projected.lpNorm<Eigen::Infinity>() < 1e-10)
        break;
    }
    return u;
  }

  Vec plant_step(const OcpProblem &problem, const Vec &x, const Vec &u, double delta)
  {
    if (!(delta > 0.0))
      throw ArgumentError("plant_step: delta must be positive");
    const Vec k1 = dynamics_rhs(problem, x, u);
    const Vec k2 = dynamics_rhs(problem, x + 0.5 * delta * k1, u);
    const Vec k3 = dynamics_rhs(problem, x + 0.5 * delta * k2, u);
    const Vec k4 = dynamics_rhs(problem, x + delta * k3, u);
    Vec next = x + (delta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite())
      throw DivergenceError("plant_step: state became non-finite");
    return next;
  }

  DisturbanceSchedule::DisturbanceSchedule(std::vector<DisturbanceEvent> events, DisturbanceMode mode,
                                           double offset_duration)
      : events_(std::move(events)), mode_(mode), offset_duration_(offset_duration)
  {
    for (std::size_t i = 0; i < events_.size(); ++i)
    {
      if (!std::isfinite(events_[i].time) || !events_[i].magnitude.allFinite())
        throw ArgumentError("DisturbanceSchedule: non-finite event");
      if (i > 0 && !(events_[i].time > events_[i - 1].time))
        throw ArgumentError("DisturbanceSchedule: event times must be strictly increasing");
    }
    if (!(offset_duration_ > 0.0))
      throw ArgumentError("DisturbanceSchedule: offset duration must be positive");
  }

  DisturbanceSchedule DisturbanceSchedule::paper()
  {
    std::vector<DisturbanceEvent> ev;
    for (auto [t, d] : {std::pair{1.0, 2.0}, {2.0, 2.0}, {3.0, -2.0}, {4.0, -2.0}, {5.0, 1.0}})
      ev.push_back({t, Vec::Constant(1, d)});
    return DisturbanceSchedule(std::move(ev));
  }

  DisturbanceSchedule DisturbanceSchedule::parse(std::string_view text)
  {
    std::vector<DisturbanceEvent> ev;
    while (!text.empty())
    {
      const std::size_t comma = text.find(',');
      const std::string_view item = text.substr(0, comma);
      text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
      const std::size_t colon = item.find(':');
      double t = 0.0, d = 0.0;
      if (colon == std::string_view::npos || !parse_double(item.substr(0, colon), t) ||
          !parse_double(item.substr(colon + 1), d))
        throw ArgumentError("disturbance: expected t:magnitude, got '" + std::string(item) + "'");
      ev.push_back({t, Vec::Constant(1, d)});
    }
    return DisturbanceSchedule(std::move(ev));
  }

  void DisturbanceSchedule::check(const OcpProblem &problem) const
  {
    for (const DisturbanceEvent &e : events_)
    {
      if (e.time < 0.0 || e.time > problem.t_final())
        throw ArgumentError("disturbance at t=" + format_double(e.time) + " lies outside [0, t_final]");
      const Eigen::Index dim = mode_ == DisturbanceMode::kStateJump ? problem.state_dim() : problem.input_dim();
      if (e.magnitude.size() != dim)
        throw ArgumentError("disturbance magnitude has the wrong dimension");
    }
  }

  namespace
  {

    void truncate(ClosedLoopResult &r, int rows)
    {
      r.times.conservativeResize(rows);
      r.x_series.conservativeResize(rows, Eigen::NoChange);
      r.disturbance_series.conservativeResize(rows, Eigen::NoChange);
      r.u_series.conservativeResize(rows - 1, Eigen::NoChange);
      r.lambda0_series.conservativeResize(rows - 1, Eigen::NoChange);
    }

  } // namespace

  ClosedLoopResult run_closed_loop(const OcpProblem &problem, const Vec &x0, const DisturbanceSchedule &schedule,
                                   bool constrained, const CostateSource &source)
  {
    const int p = problem.state_dim();
    const int q = problem.input_dim();
    if (x0.size() != p || !x0.allFinite())
      throw ArgumentError("closed loop: x0 must be a finite state vector");
    schedule.check(problem);

    const int N = problem.steps();
    const double delta = problem.delta();
    const double eps = 1e-9 * delta;
    const bool jumps = schedule.mode() == DisturbanceMode::kStateJump;

    ClosedLoopResult r;
    r.times.resize(N);
    for (int k = 0; k < N; ++k)
      r.times[k] = k * delta;
    r.x_series.setZero(N, p);
    r.u_series.setZero(N - 1, q);
    r.lambda0_series.setZero(N - 1, p);
    r.disturbance_series.setZero(N, p);

    Vec x = x0;
    if (jumps)
      for (const DisturbanceEvent &e : schedule.events())
        if (e.time <= eps)
        {
          x += e.magnitude;
          r.disturbance_series.row(0) += e.magnitude.transpose();
        }
    r.x_series.row(0) = x.transpose();

    Vec u_prev = Vec::Zero(q);
    Vec lambda_prev = Vec::Zero(p);
    for (int k = 0; k + 1 < N; ++k)
    {
      const double t0 = r.times[k];
      const double t1 = r.times[k + 1];
      std::optional<Vec> lambda0 = source(k, x);
      Vec u;
      if (lambda0 && lambda0->allFinite())
      {
        u = constrained ? solve_input_qp(problem, x, *lambda0) : unconstrained_control(problem, x, *lambda0);
        lambda_prev = *lambda0;
      }
      else
      {
        r.failed_steps.push_back(k);
        u = u_prev;
      }
      r.u_series.row(k) = u.transpose();
      r.lambda0_series.row(k) = lambda_prev.transpose();
      u_prev = u;

      Vec u_plant = u;
      if (!jumps)
        for (const DisturbanceEvent &e : schedule.events())
          if (t0 + eps >= e.time && t0 < e.time + schedule.offset_duration() - eps)
          {
            u_plant += e.magnitude;
            const Eigen::Index m = std::min(p, q);
            r.disturbance_series.row(k).head(m) += e.magnitude.head(m).transpose();
          }

      try
      {
        x = plant_step(problem, x, u_plant, delta);
      }
      catch (const DivergenceError &)
      {
        r.diverged = true;
        truncate(r, k + 1);
        break;
      }

      if (jumps)
      {
        for (const DisturbanceEvent &e : schedule.events())
          if (e.time > t0 + eps && e.time <= t1 + eps)
          {
            x += e.magnitude;
            r.disturbance_series.row(k + 1) += e.magnitude.transpose();
          }
      }
      r.x_series.row(k + 1) = x.transpose();
    }

    r.running_cost = running_cost(problem, r);
    return r;
  }

  ClosedLoopResult simulate_closed_loop(const OcpProblem &problem, const ConnModel &model, const Vec &x0,
                                        const DisturbanceSchedule &schedule, bool constrained)
  {
    if (model.state_dim() != problem.state_dim())
      throw ArgumentError("simulate_closed_loop: model and problem state dimensions differ");
    return run_closed_loop(problem, x0, schedule, constrained, [&](int, const Vec &x) -> std::optional<Vec> {
      if (!x.allFinite())
        return std::nullopt;
      return Vec(model.forward(x).row(0).transpose());
    });
  }

  ClosedLoopResult reference_closed_loop(const OcpProblem &problem, const Vec &x0,
                                         const DisturbanceSchedule &schedule, bool constrained,
                                         const SolverConfig &config)
  {
    config.validate();
    std::optional<TrajectoryPair> last;
    return run_closed_loop(problem, x0, schedule, constrained, [&](int, const Vec &x) -> std::optional<Vec> {
      TrajectoryPair pair;
      if (last)
        pair = solve_tpbvp(problem, x, config, *last);
      if (!pair.converged)
        pair = homotopy_solve(problem, x, config);
      if (!pair.converged)
        return std::nullopt;
      last = pair;
      return Vec(pair.lambda_traj.row(0).transpose());
    });
  }

  double running_cost(const OcpProblem &problem, const ClosedLoopResult &result)
  {
    const double delta = problem.delta();
    double cost = 0.0;
    for (int k = 0; k + 1 < result.steps(); ++k)
    {
      const Vec xa = result.x_series.row(k).transpose();
      const Vec xb = result.x_series.row(k + 1).transpose();
      const Vec u = result.u_series.row(k).transpose();
      cost += 0.25 * delta * (xa.dot(problem.Q() * xa) + xb.dot(problem.Q() * xb)) +
              0.5 * delta * u.dot(problem.R() * u);
    }
    return cost;
  }

  Vec stage_costs(const OcpProblem &problem, const ClosedLoopResult &result)
  {
    Vec s(result.steps());
    for (int k = 0; k < result.steps(); ++k)
    {
      const Vec x = result.x_series.row(k).transpose();
      s[k] = 0.5 * x.dot(problem.Q() * x);
      if (k < result.u_series.rows())
      {
        const Vec u = result.u_series.row(k).transpose();
        s[k] += 0.5 * u.dot(problem.R() * u);
      }
    }
    return s;
  }

} // namespace conn
