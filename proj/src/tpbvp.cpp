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

#include "conn/tpbvp.hpp"

#include "conn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace conn
{

  namespace
  {

    Vec stack(const Vec &x, const Vec &lambda)
    {
      Vec z(x.size() + lambda.size());
      z << x, lambda;
      return z;
    }

    void check_finite(const Vec &z)
    {
      if (!z.allFinite())
        throw DivergenceError("PMP integration produced non-finite values");
    }

    /// One internal step; advances z and, when requested, left-multiplies the sensitivity.
    void flow_substep(const OcpProblem &problem, Vec &z, double h, StepScheme scheme, Mat *sens)
    {
      const Eigen::Index n = z.size();
      if (scheme == StepScheme::kEuler)
      {
        const Vec k1 = pmp_rhs(problem, z);
        if (sens)
        {
          const Mat step = Mat::Identity(n, n) + h * pmp_rhs_jacobian(problem, z);
          *sens = step * (*sens);
        }
        z += h * k1;
        check_finite(z);
        return;
      }

      // Tangent propagation through the stages: d_i = J(z_i) (I + c_i h d_{i-1}).
      Vec k1, k2, k3, k4;
      Mat j1, j2, j3, j4;
      Mat *J1 = sens ? &j1 : nullptr, *J2 = sens ? &j2 : nullptr;
      Mat *J3 = sens ? &j3 : nullptr, *J4 = sens ? &j4 : nullptr;
      pmp_rhs_and_jacobian(problem, z, k1, J1);
      const Vec z2 = z + 0.5 * h * k1;
      check_finite(z2);
      pmp_rhs_and_jacobian(problem, z2, k2, J2);
      const Vec z3 = z + 0.5 * h * k2;
      check_finite(z3);
      pmp_rhs_and_jacobian(problem, z3, k3, J3);
      const Vec z4 = z + h * k3;
      check_finite(z4);
      pmp_rhs_and_jacobian(problem, z4, k4, J4);

      if (sens)
      {
        const Mat d2 = j2 + (0.5 * h) * (j2 * j1);
        const Mat d3 = j3 + (0.5 * h) * (j3 * d2);
        const Mat d4 = j4 + h * (j4 * d3);
        Mat step = (h / 6.0) * (j1 + 2.0 * d2 + 2.0 * d3 + d4);
        step.diagonal().array() += 1.0;
        *sens = step * (*sens);
      }
      z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      check_finite(z);
    }

    Vec flow(const OcpProblem &problem, Vec z, double dt, int substeps, StepScheme scheme,
             Mat *sens)
    {
      if (!(dt > 0.0))
        throw ArgumentError("integrate_pmp_ode: dt must be positive");
      if (substeps < 1)
        throw ArgumentError("integrate_pmp_ode: substeps must be >= 1");
      check_finite(z);
      if (sens)
        *sens = Mat::Identity(z.size(), z.size());
      const double h = dt / substeps;
      for (int s = 0; s < substeps; ++s)
        flow_substep(problem, z, h, scheme, sens);
      return z;
    }

    /// Multiple-shooting residual/Jacobian bookkeeping.
    class Shooting
    {
    public:
      Shooting(const OcpProblem &problem, const Vec &x0, const SolverConfig &config)
          : problem_(problem), x0_(x0), config_(config), p_(problem.state_dim())
      {
        const int intervals = problem.steps() - 1;
        segments_ = std::clamp(config.n_segments, 1, intervals);
        nodes_.resize(segments_ + 1);
        for (int s = 0; s <= segments_; ++s)
          nodes_[s] = static_cast<int>(
              std::lround(static_cast<double>(s) * intervals / static_cast<double>(segments_)));
      }

      Eigen::Index unknowns() const { return static_cast<Eigen::Index>(2 * segments_ - 1) * p_; }
      int segments() const { return segments_; }
      int node(int s) const { return nodes_[s]; }

      Eigen::Index lambda_col(int s) const { return static_cast<Eigen::Index>(s) * p_; }
      Eigen::Index x_col(int s) const
      {
        return static_cast<Eigen::Index>(segments_) * p_ + static_cast<Eigen::Index>(s - 1) * p_;
      }

      Vec node_x(const Vec &w, int s) const { return s == 0 ? x0_ : Vec(w.segment(x_col(s), p_)); }
      Vec node_lambda(const Vec &w, int s) const { return w.segment(lambda_col(s), p_); }

      /// Residual vector; the Jacobian is filled when `jac` is non-null.
      /// Returns std::nullopt when integration diverges.
      std::optional<Vec> evaluate(const Vec &w, Mat *jac) const
      {
        const Eigen::Index m = unknowns();
        Vec r(m);
        if (jac)
          jac->setZero(m, m);
        const Mat eye = Mat::Identity(p_, p_);
        try
        {
          for (int s = 0; s < segments_; ++s)
          {
            Vec z = stack(node_x(w, s), node_lambda(w, s));
            Mat phi = Mat::Identity(2 * p_, 2 * p_);
            Mat step_sens;
            for (int k = nodes_[s]; k < nodes_[s + 1]; ++k)
            {
              z = flow(problem_, z, problem_.delta(), config_.fine_substeps, StepScheme::kRk4,
                       jac ? &step_sens : nullptr);
              if (jac)
                phi = step_sens * phi;
            }
            const Vec x_end = z.head(p_);
            const Vec l_end = z.tail(p_);
            const Eigen::Index row = static_cast<Eigen::Index>(s) * 2 * p_;
            if (s + 1 < segments_)
            {
              r.segment(row, p_) = x_end - node_x(w, s + 1);
              r.segment(row + p_, p_) = l_end - node_lambda(w, s + 1);
            }
            else
            {
              r.segment(row, p_) = x_end - problem_.x_target();
            }
            if (!jac)
              continue;

            const Mat phi_xx = phi.topLeftCorner(p_, p_);
            const Mat phi_xl = phi.topRightCorner(p_, p_);
            const Mat phi_lx = phi.bottomLeftCorner(p_, p_);
            const Mat phi_ll = phi.bottomRightCorner(p_, p_);
            jac->block(row, lambda_col(s), p_, p_) = phi_xl;
            if (s >= 1)
              jac->block(row, x_col(s), p_, p_) = phi_xx;
            if (s + 1 < segments_)
            {
              jac->block(row, x_col(s + 1), p_, p_) = -eye;
              jac->block(row + p_, lambda_col(s), p_, p_) = phi_ll;
              if (s >= 1)
                jac->block(row + p_, x_col(s), p_, p_) = phi_lx;
              jac->block(row + p_, lambda_col(s + 1), p_, p_) = -eye;
            }
          }
        }
        catch (const DivergenceError &)
        {
          return std::nullopt;
        }
        if (!r.allFinite() || (jac && !jac->allFinite()))
          return std::nullopt;
        return r;
      }

      Vec from_pair(const TrajectoryPair &pair) const
      {
        if (pair.x_traj.rows() != problem_.steps() || pair.lambda_traj.rows() != problem_.steps() ||
            pair.x_traj.cols() != p_ || pair.lambda_traj.cols() != p_)
          throw ArgumentError("solve_tpbvp: warm start grid does not match the problem grid");
        Vec w(unknowns());
        for (int s = 0; s < segments_; ++s)
        {
          w.segment(lambda_col(s), p_) = pair.lambda_traj.row(nodes_[s]).transpose();
          if (s >= 1)
            w.segment(x_col(s), p_) = pair.x_traj.row(nodes_[s]).transpose();
        }
        return w;
      }

      /// Grid sampling of the shooting solution. Node values are used at segment starts.
      void sample(const Vec &w, TrajectoryPair &out) const
      {
        const int n = problem_.steps();
        out.x_traj.resize(n, p_);
        out.lambda_traj.resize(n, p_);
        for (int s = 0; s < segments_; ++s)
        {
          Vec z = stack(node_x(w, s), node_lambda(w, s));
          out.x_traj.row(nodes_[s]) = z.head(p_).transpose();
          out.lambda_traj.row(nodes_[s]) = z.tail(p_).transpose();
          for (int k = nodes_[s]; k < nodes_[s + 1]; ++k)
          {
            z = flow(problem_, z, problem_.delta(), config_.fine_substeps, StepScheme::kRk4, nullptr);
            out.x_traj.row(k + 1) = z.head(p_).transpose();
            out.lambda_traj.row(k + 1) = z.tail(p_).transpose();
          }
        }
        out.x_traj.row(0) = x0_.transpose();
      }

    private:
      const OcpProblem &problem_;
      Vec x0_;
      SolverConfig config_;
      int p_;
      int segments_ = 1;
      std::vector<int> nodes_;
    };

    TrajectoryPair run_newton(const OcpProblem &problem, const Vec &x0, const SolverConfig &config,
                              const std::optional<TrajectoryPair> &warm)
    {
      config.validate();
      if (x0.size() != problem.state_dim())
        throw ArgumentError("solve_tpbvp: x0 dimension does not match the problem");
      if (!x0.allFinite())
        throw ArgumentError("solve_tpbvp: x0 must be finite");

      const Shooting shooting(problem, x0, config);
      Vec w = warm ? shooting.from_pair(*warm) : Vec::Zero(shooting.unknowns());

      TrajectoryPair result;
      result.x0 = x0;

      Mat jac;
      std::optional<Vec> r = shooting.evaluate(w, &jac);
      if (!r && warm)
      {
        w.setZero();
        r = shooting.evaluate(w, &jac);
      }
      if (!r)
      {
        result.x_traj = Trajectory::Constant(problem.steps(), problem.state_dim(), std::nan(""));
        result.lambda_traj = result.x_traj;
        result.x_traj.row(0) = x0.transpose();
        return result;
      }

      constexpr double kMinStep = 1.0 / 1048576.0; // 2^-20
      int iter = 0;
      bool converged = r->lpNorm<Eigen::Infinity>() <= config.newton_tol;
      while (!converged && iter < config.max_newton_iters)
      {
        const Vec dw = jac.partialPivLu().solve(-(*r));
        if (!dw.allFinite())
          break;
        const double merit0 = r->norm();
        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= kMinStep)
        {
          const Vec w_try = w + alpha * dw;
          Mat jac_try;
          std::optional<Vec> r_try = shooting.evaluate(w_try, &jac_try);
          if (r_try && r_try->norm() <= (1.0 - 1e-4 * alpha) * merit0)
          {
            w = w_try;
            r = std::move(r_try);
            jac = std::move(jac_try);
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        ++iter;
        if (!accepted)
          break;
        converged = r->lpNorm<Eigen::Infinity>() <= config.newton_tol;
      }

      result.newton_iterations = iter;
      result.residual_norm = r->lpNorm<Eigen::Infinity>();
      try
      {
        shooting.sample(w, result);
      }
      catch (const DivergenceError &)
      {
        converged = false;
      }
      if (converged)
      {
        const Vec miss = result.x_traj.row(problem.steps() - 1).transpose() - problem.x_target();
        converged = miss.lpNorm<Eigen::Infinity>() <= config.boundary_tol;
      }
      result.converged = converged;
      return result;
    }

  } // namespace

  PmpState integrate_pmp_ode(const OcpProblem &problem, const Vec &x, const Vec &lambda,
                             double dt, int substeps, StepScheme scheme)
  {
    if (x.size() != problem.state_dim() || lambda.size() != problem.state_dim())
      throw ArgumentError("integrate_pmp_ode: dimension mismatch");
    const Vec z = flow(problem, stack(x, lambda), dt, substeps, scheme, nullptr);
    const int p = problem.state_dim();
    return {z.head(p), z.tail(p)};
  }

  PmpFlowStep integrate_pmp_ode_with_jacobian(const OcpProblem &problem, const Vec &x,
                                              const Vec &lambda, double dt, int substeps,
                                              StepScheme scheme)
  {
    if (x.size() != problem.state_dim() || lambda.size() != problem.state_dim())
      throw ArgumentError("integrate_pmp_ode: dimension mismatch");
    PmpFlowStep out;
    const Vec z = flow(problem, stack(x, lambda), dt, substeps, scheme, &out.jacobian);
    const int p = problem.state_dim();
    out.x = z.head(p);
    out.lambda = z.tail(p);
    return out;
  }

  void SolverConfig::validate() const
  {
    if (n_segments < 1)
      throw ArgumentError("SolverConfig: n_segments must be >= 1");
    if (!(newton_tol > 0.0))
      throw ArgumentError("SolverConfig: newton_tol must be positive");
    if (max_newton_iters < 0)
      throw ArgumentError("SolverConfig: max_newton_iters must be non-negative");
    if (fine_substeps < 1)
      throw ArgumentError("SolverConfig: fine_substeps must be >= 1");
    if (!(boundary_tol > 0.0))
      throw ArgumentError("SolverConfig: boundary_tol must be positive");
  }

  TrajectoryPair solve_tpbvp(const OcpProblem &problem, const Vec &x0, const SolverConfig &config)
  {
    return run_newton(problem, x0, config, std::nullopt);
  }

  TrajectoryPair solve_tpbvp(const OcpProblem &problem, const Vec &x0, const SolverConfig &config,
                             const TrajectoryPair &warm_start)
  {
    return run_newton(problem, x0, config, warm_start);
  }

  std::vector<TrajectoryPair> continuation_solve(const OcpProblem &problem,
                                                 const std::vector<Vec> &x0_list,
                                                 const SolverConfig &config)
  {
    config.validate();
    double last_distance = 0.0;
    for (const Vec &x0 : x0_list)
    {
      if (x0.size() != problem.state_dim())
        throw ArgumentError("continuation_solve: x0 dimension does not match the problem");
      const double d = (x0 - problem.x_target()).norm();
      if (d + 1e-12 * std::max(1.0, d) < last_distance)
        throw ArgumentError("continuation_solve: x0_list must be sorted by distance from x_target");
      last_distance = d;
    }

    std::vector<TrajectoryPair> out;
    out.reserve(x0_list.size());
    for (const Vec &x0 : x0_list)
    {
      const TrajectoryPair *nearest = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const TrajectoryPair &prev : out)
      {
        if (!prev.converged)
          continue;
        const double d = (prev.x0 - x0).norm();
        if (d < best)
        {
          best = d;
          nearest = &prev;
        }
      }

      TrajectoryPair sol = nearest ? solve_tpbvp(problem, x0, config, *nearest)
                                   : solve_tpbvp(problem, x0, config);
      if (!sol.converged && nearest)
        sol = solve_tpbvp(problem, x0, config);
      // Last resort: walk from the nearest solution in progressively finer increments.
      for (int pieces = 2; !sol.converged && nearest && pieces <= 32; pieces *= 2)
      {
        TrajectoryPair chain = *nearest;
        for (int j = 1; j <= pieces && chain.converged; ++j)
        {
          const double s = static_cast<double>(j) / pieces;
          const Vec xi = (1.0 - s) * nearest->x0 + s * x0;
          chain = solve_tpbvp(problem, j == pieces ? x0 : xi, config, chain);
        }
        if (chain.converged)
          sol = std::move(chain);
      }
      out.push_back(std::move(sol));
    }
    return out;
  }

  TrajectoryPair homotopy_solve(const OcpProblem &problem, const Vec &x0, const SolverConfig &config,
                                double max_step)
  {
    if (!(max_step > 0.0))
      throw ArgumentError("homotopy_solve: max_step must be positive");
    const Vec span = x0 - problem.x_target();
    const int pieces = std::max(1, static_cast<int>(std::ceil(span.lpNorm<Eigen::Infinity>() / max_step)));
    std::vector<Vec> chain;
    for (int j = 1; j <= pieces; ++j)
      chain.push_back(j == pieces ? Vec(x0) : Vec(problem.x_target() + (static_cast<double>(j) / pieces) * span));
    std::vector<TrajectoryPair> sols = continuation_solve(problem, chain, config);
    return sols.back();
  }

  Trajectory optimal_inputs(const OcpProblem &problem, const TrajectoryPair &pair)
  {
    Trajectory u(pair.x_traj.rows(), problem.input_dim());
    for (Eigen::Index k = 0; k < pair.x_traj.rows(); ++k)
      u.row(k) = unconstrained_control(problem, pair.x_traj.row(k).transpose(),
                                       pair.lambda_traj.row(k).transpose())
                     .transpose();
    return u;
  }

} // namespace conn
