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

#include <limits>
#include <vector>

namespace conn
{

  enum class StepScheme
  {
    kRk4,
    kEuler, ///< sensitivity checks only
  };

  struct PmpState
  {
    Vec x;
    Vec lambda;
  };

  /// End state of a PMP flow step together with d(x, lambda)_end / d(x, lambda)_start.
  struct PmpFlowStep
  {
    Vec x;
    Vec lambda;
    Mat jacobian; ///< 2p x 2p, ordered [x; lambda]
  };

  /**
   * Advances the coupled state/co-state system by dt using `substeps`
   * internal steps, with u = -R^{-1} g' lambda re-evaluated at every stage.
   * Throws DivergenceError when a non-finite value appears.
   */
  PmpState integrate_pmp_ode(const OcpProblem &problem, const Vec &x, const Vec &lambda,
                             double dt, int substeps, StepScheme scheme = StepScheme::kRk4);

  /// Same step as integrate_pmp_ode, also propagating the variational equations.
  PmpFlowStep integrate_pmp_ode_with_jacobian(const OcpProblem &problem, const Vec &x,
                                              const Vec &lambda, double dt, int substeps,
                                              StepScheme scheme = StepScheme::kRk4);

  struct SolverConfig
  {
    int n_segments = 20;
    double newton_tol = 1e-8;
    int max_newton_iters = 100;
    int fine_substeps = 4;
    double boundary_tol = 1e-4;

    void validate() const;
  };

  struct TrajectoryPair
  {
    Vec x0;
    Trajectory x_traj;      ///< N x p
    Trajectory lambda_traj; ///< N x p
    bool converged = false;
    double residual_norm = std::numeric_limits<double>::infinity();
    int newton_iterations = 0;
  };

  /**
   * @brief Multiple-shooting solution of the unconstrained PMP boundary value problem
   *
   * Unknowns are the co-states at every segment start and the states at the
   * interior segment starts; residuals are segment continuity plus
   * x(t_final) = x_target. Newton steps use the exact shooting Jacobian from
   * the variational equations and are damped by Armijo backtracking
   * (factor 0.5, smallest step 2^-20). Stagnation or divergence yields
   * converged = false, never an exception.
   */
  TrajectoryPair solve_tpbvp(const OcpProblem &problem, const Vec &x0,
                             const SolverConfig &config = {});

  /// Warm-started variant; shooting variables are read from `warm_start` at the segment nodes.
  TrajectoryPair solve_tpbvp(const OcpProblem &problem, const Vec &x0, const SolverConfig &config,
                             const TrajectoryPair &warm_start);

  /**
   * Solves a list of initial states ordered by distance from x_target. Each
   * solve is warm-started from the closest previously converged solution,
   * falls back to zero initialisation, and finally to a short chain of
   * intermediate initial states. Failures are reported per item.
   */
  std::vector<TrajectoryPair> continuation_solve(const OcpProblem &problem,
                                                 const std::vector<Vec> &x0_list,
                                                 const SolverConfig &config = {});

  /// Continuation along the straight line from x_target to x0 with steps of at most max_step.
  TrajectoryPair homotopy_solve(const OcpProblem &problem, const Vec &x0,
                                const SolverConfig &config = {}, double max_step = 0.5);

  /// Unconstrained optimal inputs along a solved pair (N x q).
  Trajectory optimal_inputs(const OcpProblem &problem, const TrajectoryPair &pair);

} // namespace conn
