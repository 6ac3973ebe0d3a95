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
#include "conn/ocp.hpp"

#include <vector>

namespace conn
{

  /**
   * @brief Trapezoidal transcription of the OCP
   *
   * Decision vector z = (x_0..x_{N-1}, u_0..u_{N-1}). Defect k is
   *   x_{k+1} - x_k - delta/2 (F_k + F_{k+1}),  F_k = f(x_k) + g(x_k) u_k.
   * Inputs carry the problem's box; x_0 and x_{N-1} are pinned through
   * degenerate bounds.
   */
  class CollocationNlp
  {
  public:
    CollocationNlp(OcpProblem problem, Vec x0);

    const OcpProblem &problem() const { return problem_; }
    const Vec &x0() const { return x0_; }
    int steps() const { return N_; }
    int decision_size() const { return N_ * (p_ + q_); }
    int defect_count() const { return (N_ - 1) * p_; }
    const Vec &lower() const { return lower_; }
    const Vec &upper() const { return upper_; }

    Eigen::Index x_index(int k) const { return static_cast<Eigen::Index>(k) * p_; }
    Eigen::Index u_index(int k) const { return static_cast<Eigen::Index>(N_) * p_ + static_cast<Eigen::Index>(k) * q_; }

    /// Trapezoidal quadrature of 1/2 (x'Qx + u'Ru).
    double objective(const Vec &z) const;
    Vec objective_gradient(const Vec &z) const;
    Vec defects(const Vec &z) const;
    /// Dense (N-1)p x N(p+q) Jacobian; meant for tests and small grids.
    Mat defect_jacobian(const Vec &z) const;
    /// J(z)' v without forming J.
    Vec defect_jacobian_transpose_times(const Vec &z, const Vec &v) const;
    /// Hessian of objective + nu' defects (dense).
    Mat lagrangian_hessian(const Vec &z, const Vec &nu) const;

    /// States linearly interpolated from x0 to x_target, zero inputs, clipped into the box.
    Vec initial_guess() const;
    Vec project(const Vec &z) const;

    Trajectory states(const Vec &z) const;
    Trajectory inputs(const Vec &z) const;

  private:
    OcpProblem problem_;
    Vec x0_;
    int N_, p_, q_;
    Vec lower_, upper_;
  };

  enum class InnerSolver
  {
    kProjectedNewton, ///< exact Hessian of the augmented Lagrangian on the free variables
    kLbfgs,           ///< projected L-BFGS
  };

  struct CollocationOptions
  {
    InnerSolver inner = InnerSolver::kProjectedNewton;
    double defect_tol = 1e-6;
    double gradient_tol = 1e-6;
    int max_outer = 60;
    int max_inner = 20000; ///< L-BFGS; projected Newton uses max_inner / 100
    int lbfgs_memory = 10;
    double initial_penalty = 10.0;
    double max_penalty = 1e10;
  };

  struct OuterIterate
  {
    double merit_start = 0.0; ///< merit at the previous iterate, current multipliers and penalty
    double merit_end = 0.0;   ///< merit at the accepted iterate, same multipliers and penalty
    double max_defect = 0.0;
    double penalty = 0.0;
    int inner_iterations = 0;
  };

  enum class NlpStatus
  {
    kConverged,
    kIterationLimit,
  };

  struct CollocationResult
  {
    Vec z;
    Vec times;
    Trajectory x_traj;    ///< N x p
    Trajectory u_traj;    ///< N x q
    Trajectory multipliers; ///< (N-1) x p, one per defect
    /// N x p node co-states: minus the average of the adjacent defect multipliers
    /// (a single one at the ends), so that u_k = -R^{-1} g(x_k)' lambda_k at interior optima.
    Trajectory costates;
    double cost = 0.0;
    double max_defect = 0.0;
    double projected_gradient = 0.0;
    NlpStatus status = NlpStatus::kIterationLimit;
    std::vector<OuterIterate> history;

    bool converged() const { return status == NlpStatus::kConverged; }
  };

  /// Augmented Lagrangian on the defects; bound-constrained inner minimisation.
  CollocationResult solve_nlp(const CollocationNlp &nlp, const Vec &init, const CollocationOptions &options = {});

  /// Open-loop collocation solution reshaped as a closed-loop record (last input dropped).
  ClosedLoopResult to_closed_loop(const CollocationResult &result);

  struct TrajectoryComparison
  {
    double max_state_deviation = 0.0;
    double mean_state_deviation = 0.0;
    double cost_gap = 0.0; ///< cost(a) - cost(b)
  };

  /**
   * State deviations (infinity norm per sample) over samples with t >= t_from.
   * Throws ArgumentError when the time grids differ or no sample remains.
   */
  TrajectoryComparison compare_trajectories(const ClosedLoopResult &a, const ClosedLoopResult &b,
                                            double t_from = 0.0);

} // namespace conn
