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

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace conn
{

  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;

  /// Sampled trajectory, one row per time step (row k is the value at t = k * delta).
  using Trajectory = Eigen::MatrixXd;

  /// Third-order array stored as a list of matrices; entry i is the partial
  /// derivative with respect to state coordinate x_i.
  using MatStack = std::vector<Eigen::MatrixXd>;

  /**
   * @brief Plain description of a control-affine OCP
   *
   *   min 1/2 int (x'Qx + u'Ru) dt,  xdot = f(x) + g(x) u,  u_min <= u <= u_max,
   *   x(0) = x0,  x(t_final) = x_target.
   *
   * First derivatives are mandatory. Second derivatives are only needed for
   * exact sensitivities of the coupled state/co-state flow; when left empty
   * they are replaced by central differences of the first derivatives.
   */
  struct OcpDefinition
  {
    std::string id;
    int state_dim = 1;
    int input_dim = 1;

    std::function<Vec(const Vec &)> f;
    std::function<Mat(const Vec &)> df_dx;
    std::function<Mat(const Vec &)> g;
    std::function<MatStack(const Vec &)> dg_dx;

    /// entry i: d(df_dx)/dx_i, p x p
    std::function<MatStack(const Vec &)> d2f_dx2;
    /// entry [m][i]: d(dg_dx[m])/dx_i, p x q
    std::function<std::vector<MatStack>(const Vec &)> d2g_dx2;

    Mat Q;
    Mat R;
    Vec u_min;
    Vec u_max;
    Vec x_target;
    double t_final = 10.0;
    double delta = 0.05;
  };

  /// Validated, immutable OCP. Construction throws ArgumentError when an invariant is violated.
  class OcpProblem
  {
  public:
    explicit OcpProblem(OcpDefinition definition);

    const std::string &id() const { return def_.id; }
    int state_dim() const { return def_.state_dim; }
    int input_dim() const { return def_.input_dim; }
    const Mat &Q() const { return def_.Q; }
    const Mat &R() const { return def_.R; }
    const Vec &u_min() const { return def_.u_min; }
    const Vec &u_max() const { return def_.u_max; }
    const Vec &x_target() const { return def_.x_target; }
    double t_final() const { return def_.t_final; }
    double delta() const { return def_.delta; }
    /// Number of grid points N = t_final / delta + 1.
    int steps() const { return steps_; }
    bool r_is_diagonal() const { return r_diagonal_; }
    bool has_second_derivatives() const;

    Vec f(const Vec &x) const { return def_.f(x); }
    Mat df_dx(const Vec &x) const { return def_.df_dx(x); }
    Mat g(const Vec &x) const { return def_.g(x); }
    MatStack dg_dx(const Vec &x) const { return def_.dg_dx(x); }
    MatStack d2f_dx2(const Vec &x) const;
    std::vector<MatStack> d2g_dx2(const Vec &x) const;

    /// R^{-1} b
    Vec solve_r(const Vec &b) const { return r_llt_.solve(b); }
    Mat solve_r(const Mat &b) const { return r_llt_.solve(b); }

    OcpProblem with_bounds(const Vec &u_min, const Vec &u_max) const;
    OcpProblem with_grid(double t_final, double delta) const;
    OcpProblem unbounded() const;

    const OcpDefinition &definition() const { return def_; }

  private:
    OcpDefinition def_;
    Eigen::LLT<Mat> r_llt_;
    int steps_ = 0;
    bool r_diagonal_ = false;
  };

  /// One point (x, u, lambda) of a PMP extremal.
  struct PmpPoint
  {
    Vec x;
    Vec u;
    Vec lambda;
  };

  /// f(x) + g(x) u
  Vec dynamics_rhs(const OcpProblem &problem, const Vec &x, const Vec &u);

  /// 1/2 x'Qx + 1/2 u'Ru + lambda'(f(x) + g(x) u)
  double hamiltonian(const OcpProblem &problem, const PmpPoint &pt);

  /// -dH/dx = -Qx - (df/dx)' lambda - (dg/dx u)' lambda
  Vec costate_rhs(const OcpProblem &problem, const Vec &x, const Vec &u, const Vec &lambda);

  /// dH/du = Ru + g(x)' lambda
  Vec hamiltonian_input_gradient(const OcpProblem &problem, const Vec &x, const Vec &u,
                                 const Vec &lambda);

  /// u = -R^{-1} g(x)' lambda. Input bounds are ignored.
  Vec unconstrained_control(const OcpProblem &problem, const Vec &x, const Vec &lambda);

  /// Right-hand side of the coupled (x, lambda) system with the unconstrained
  /// control substituted; z = [x; lambda].
  Vec pmp_rhs(const OcpProblem &problem, const Vec &z);

  /// 2p x 2p Jacobian of pmp_rhs.
  Mat pmp_rhs_jacobian(const OcpProblem &problem, const Vec &z);

  /// pmp_rhs and, when jac is non-null, its Jacobian from one set of model evaluations.
  void pmp_rhs_and_jacobian(const OcpProblem &problem, const Vec &z, Vec &rhs, Mat *jac);

  /**
   * @brief Consistency of sampled trajectories with the PMP equations.
   *
   * Derivatives are estimated with a finite-difference stencil of up to nine
   * grid points (8th order in the interior, shifted one-sided near the ends)
   * and compared with the analytic state and co-state right-hand sides at every
   * interior grid point. Each mismatch is divided by max(1, |rhs|_inf), so the
   * value is absolute near equilibrium and relative on fast transients. The
   * stationarity residual |dH/du| is added at points where u lies strictly
   * inside its bounds.
   *
   * Throws ArgumentError for mismatched shapes or fewer than 3 samples.
   */
  double pmp_residual(const OcpProblem &problem, const Trajectory &x_traj,
                      const Trajectory &lambda_traj, const Trajectory &u_traj);

  /// Fornberg finite-difference weights for the first derivative at `at`
  /// over the nodes `offsets` (in units of the grid spacing).
  std::vector<double> first_derivative_weights(const std::vector<double> &offsets, double at);

} // namespace conn
