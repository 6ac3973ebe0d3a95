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

#include "conn/collocation.hpp"

#include "conn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace conn
{

  CollocationNlp::CollocationNlp(OcpProblem problem, Vec x0)
      : problem_(std::move(problem)), x0_(std::move(x0)), N_(problem_.steps()), p_(problem_.state_dim()),
        q_(problem_.input_dim())
  {
    if (x0_.size() != p_ || !x0_.allFinite())
      throw ArgumentError("CollocationNlp: x0 must be a finite state vector");
    const double inf = std::numeric_limits<double>::infinity();
    lower_ = Vec::Constant(decision_size(), -inf);
    upper_ = Vec::Constant(decision_size(), inf);
    lower_.segment(x_index(0), p_) = x0_;
    upper_.segment(x_index(0), p_) = x0_;
    lower_.segment(x_index(N_ - 1), p_) = problem_.x_target();
    upper_.segment(x_index(N_ - 1), p_) = problem_.x_target();
    for (int k = 0; k < N_; ++k)
    {
      lower_.segment(u_index(k), q_) = problem_.u_min();
      upper_.segment(u_index(k), q_) = problem_.u_max();
    }
  }

  namespace
  {

    struct NodeModel
    {
      std::vector<Vec> F; ///< f + g u
      std::vector<Mat> A; ///< dF/dx
      std::vector<Mat> B; ///< dF/du = g
    };

    NodeModel evaluate_nodes(const CollocationNlp &nlp, const Vec &z, bool with_jacobians)
    {
      const OcpProblem &pr = nlp.problem();
      const int p = pr.state_dim(), q = pr.input_dim();
      NodeModel m;
      m.F.resize(nlp.steps());
      if (with_jacobians)
      {
        m.A.resize(nlp.steps());
        m.B.resize(nlp.steps());
      }
      for (int k = 0; k < nlp.steps(); ++k)
      {
        const Vec x = z.segment(nlp.x_index(k), p);
        const Vec u = z.segment(nlp.u_index(k), q);
        const Mat g = pr.g(x);
        m.F[k] = pr.f(x) + g * u;
        if (!with_jacobians)
          continue;
        Mat A = pr.df_dx(x);
        const MatStack dg = pr.dg_dx(x);
        for (int i = 0; i < p; ++i)
          A.col(i) += dg[i] * u;
        m.A[k] = std::move(A);
        m.B[k] = g;
      }
      return m;
    }

    double trapezoid_weight(int k, int N) { return (k == 0 || k == N - 1) ? 0.5 : 1.0; }

  } // namespace

  double CollocationNlp::objective(const Vec &z) const
  {
    double J = 0.0;
    const double d = problem_.delta();
    for (int k = 0; k < N_; ++k)
    {
      const auto x = z.segment(x_index(k), p_);
      const auto u = z.segment(u_index(k), q_);
      J += trapezoid_weight(k, N_) * 0.5 * d * (x.dot(problem_.Q() * x) + u.dot(problem_.R() * u));
    }
    return J;
  }

  Vec CollocationNlp::objective_gradient(const Vec &z) const
  {
    Vec grad(decision_size());
    const double d = problem_.delta();
    for (int k = 0; k < N_; ++k)
    {
      const double w = trapezoid_weight(k, N_) * d;
      grad.segment(x_index(k), p_) = w * (problem_.Q() * z.segment(x_index(k), p_));
      grad.segment(u_index(k), q_) = w * (problem_.R() * z.segment(u_index(k), q_));
    }
    return grad;
  }

  Vec CollocationNlp::defects(const Vec &z) const
  {
    const NodeModel m = evaluate_nodes(*this, z, false);
    const double h = 0.5 * problem_.delta();
    Vec c(defect_count());
    for (int k = 0; k + 1 < N_; ++k)
      c.segment(static_cast<Eigen::Index>(k) * p_, p_) =
          z.segment(x_index(k + 1), p_) - z.segment(x_index(k), p_) - h * (m.F[k] + m.F[k + 1]);
    return c;
  }

  Mat CollocationNlp::defect_jacobian(const Vec &z) const
  {
    const NodeModel m = evaluate_nodes(*this, z, true);
    const double h = 0.5 * problem_.delta();
    const Mat I = Mat::Identity(p_, p_);
    Mat J = Mat::Zero(defect_count(), decision_size());
    for (int k = 0; k + 1 < N_; ++k)
    {
      const Eigen::Index r = static_cast<Eigen::Index>(k) * p_;
      J.block(r, x_index(k), p_, p_) = -I - h * m.A[k];
      J.block(r, x_index(k + 1), p_, p_) = I - h * m.A[k + 1];
      J.block(r, u_index(k), p_, q_) = -h * m.B[k];
      J.block(r, u_index(k + 1), p_, q_) = -h * m.B[k + 1];
    }
    return J;
  }

  Vec CollocationNlp::defect_jacobian_transpose_times(const Vec &z, const Vec &v) const
  {
    if (v.size() != defect_count())
      throw ArgumentError("defect_jacobian_transpose_times: wrong multiplier length");
    const NodeModel m = evaluate_nodes(*this, z, true);
    const double h = 0.5 * problem_.delta();
    Vec out = Vec::Zero(decision_size());
    for (int k = 0; k + 1 < N_; ++k)
    {
      const Vec vk = v.segment(static_cast<Eigen::Index>(k) * p_, p_);
      out.segment(x_index(k), p_) += -vk - h * m.A[k].transpose() * vk;
      out.segment(x_index(k + 1), p_) += vk - h * m.A[k + 1].transpose() * vk;
      out.segment(u_index(k), q_) -= h * m.B[k].transpose() * vk;
      out.segment(u_index(k + 1), q_) -= h * m.B[k + 1].transpose() * vk;
    }
    return out;
  }

  Mat CollocationNlp::lagrangian_hessian(const Vec &z, const Vec &nu) const
  {
    if (nu.size() != defect_count())
      throw ArgumentError("lagrangian_hessian: wrong multiplier length");
    const double d = problem_.delta();
    const double h = 0.5 * d;
    Mat H = Mat::Zero(decision_size(), decision_size());
    for (int k = 0; k < N_; ++k)
    {
      const Eigen::Index xi = x_index(k), ui = u_index(k);
      const double w = trapezoid_weight(k, N_) * d;
      H.block(xi, xi, p_, p_) += w * problem_.Q();
      H.block(ui, ui, q_, q_) += w * problem_.R();

      // Node k enters defects k-1 and k with the same -h F_k term.
      Vec omega = Vec::Zero(p_);
      if (k > 0)
        omega -= h * nu.segment(static_cast<Eigen::Index>(k - 1) * p_, p_);
      if (k + 1 < N_)
        omega -= h * nu.segment(static_cast<Eigen::Index>(k) * p_, p_);

      const Vec x = z.segment(xi, p_);
      const Vec u = z.segment(ui, q_);
      const MatStack d2f = problem_.d2f_dx2(x);
      const std::vector<MatStack> d2g = problem_.d2g_dx2(x);
      const MatStack dg = problem_.dg_dx(x);
      for (int j = 0; j < p_; ++j)
      {
        H.block(xi, xi + j, p_, 1) += d2f[j].transpose() * omega;
        for (int a = 0; a < p_; ++a)
          H(xi + a, xi + j) += omega.dot(d2g[a][j] * u);
      }
      for (int a = 0; a < p_; ++a)
      {
        const Vec row = dg[a].transpose() * omega;
        H.block(xi + a, ui, 1, q_) += row.transpose();
        H.block(ui, xi + a, q_, 1) += row;
      }
    }
    return H;
  }

  Vec CollocationNlp::initial_guess() const
  {
    Vec z = Vec::Zero(decision_size());
    for (int k = 0; k < N_; ++k)
    {
      const double s = static_cast<double>(k) / (N_ - 1);
      z.segment(x_index(k), p_) = (1.0 - s) * x0_ + s * problem_.x_target();
    }
    return project(z);
  }

  Vec CollocationNlp::project(const Vec &z) const { return z.cwiseMax(lower_).cwiseMin(upper_); }

  Trajectory CollocationNlp::states(const Vec &z) const
  {
    Trajectory x(N_, p_);
    for (int k = 0; k < N_; ++k)
      x.row(k) = z.segment(x_index(k), p_).transpose();
    return x;
  }

  Trajectory CollocationNlp::inputs(const Vec &z) const
  {
    Trajectory u(N_, q_);
    for (int k = 0; k < N_; ++k)
      u.row(k) = z.segment(u_index(k), q_).transpose();
    return u;
  }

  namespace
  {

    class AugmentedLagrangian
    {
    public:
      AugmentedLagrangian(const CollocationNlp &nlp, const Vec &mu, double rho) : nlp_(nlp), mu_(mu), rho_(rho) {}

      double value(const Vec &z) const
      {
        const Vec c = nlp_.defects(z);
        return nlp_.objective(z) + mu_.dot(c) + 0.5 * rho_ * c.squaredNorm();
      }

      double value_and_gradient(const Vec &z, Vec &grad) const
      {
        const Vec c = nlp_.defects(z);
        grad = nlp_.objective_gradient(z) + nlp_.defect_jacobian_transpose_times(z, mu_ + rho_ * c);
        return nlp_.objective(z) + mu_.dot(c) + 0.5 * rho_ * c.squaredNorm();
      }

    private:
      const CollocationNlp &nlp_;
      const Vec &mu_;
      double rho_;
    };

    double projected_gradient_norm(const CollocationNlp &nlp, const Vec &z, const Vec &grad)
    {
      return (nlp.project(z - grad) - z).lpNorm<Eigen::Infinity>();
    }

    /// Projected L-BFGS; returns the number of iterations used.
    int minimize_box(const CollocationNlp &nlp, const AugmentedLagrangian &merit, Vec &z, double tol,
                     int max_iter, int memory)
    {
      const Vec &lo = nlp.lower();
      const Vec &hi = nlp.upper();
      std::deque<std::pair<Vec, Vec>> pairs;
      Vec grad;
      double value = merit.value_and_gradient(z, grad);
      int it = 0;
      int stalled = 0;
      for (; it < max_iter && stalled < 50; ++it)
      {
        if (projected_gradient_norm(nlp, z, grad) < tol)
          break;

        // Variables held at an active bound are frozen for this step.
        Eigen::Array<bool, Eigen::Dynamic, 1> free(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
          free[i] = !(lo[i] == hi[i] || (z[i] <= lo[i] && grad[i] > 0.0) || (z[i] >= hi[i] && grad[i] < 0.0));
        auto mask = [&](Vec v) {
          for (Eigen::Index i = 0; i < v.size(); ++i)
            if (!free[i])
              v[i] = 0.0;
          return v;
        };

        Vec d = mask(grad);
        std::vector<double> alpha(pairs.size());
        for (std::size_t j = pairs.size(); j-- > 0;)
        {
          const auto &[s, y] = pairs[j];
          alpha[j] = mask(s).dot(d) / mask(y).dot(mask(s));
          d -= alpha[j] * mask(y);
        }
        if (!pairs.empty())
        {
          const Vec s = mask(pairs.back().first), y = mask(pairs.back().second);
          const double yy = y.squaredNorm();
          if (yy > 0.0 && s.dot(y) > 0.0)
            d *= s.dot(y) / yy;
        }
        for (std::size_t j = 0; j < pairs.size(); ++j)
        {
          const Vec s = mask(pairs[j].first), y = mask(pairs[j].second);
          const double beta = y.dot(d) / y.dot(s);
          d += (alpha[j] - beta) * s;
        }
        d = -mask(d);
        if (!d.allFinite() || grad.dot(d) >= 0.0)
        {
          pairs.clear();
          d = -mask(grad);
        }

        double step = 1.0;
        if (pairs.empty())
          step = std::min(1.0, 1.0 / std::max(1e-12, d.lpNorm<Eigen::Infinity>()));
        Vec trial;
        double trial_value = value;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, step *= 0.5)
        {
          trial = nlp.project(z + step * d);
          trial_value = merit.value(trial);
          if (std::isfinite(trial_value) && trial_value <= value + 1e-4 * grad.dot(trial - z))
          {
            accepted = true;
            break;
          }
        }
        if (!accepted)
        {
          if (pairs.empty())
            break;
          pairs.clear();
          continue;
        }

        Vec trial_grad;
        trial_value = merit.value_and_gradient(trial, trial_grad);
        Vec s = trial - z, y = trial_grad - grad;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm())
        {
          pairs.emplace_back(std::move(s), std::move(y));
          if (static_cast<int>(pairs.size()) > memory)
            pairs.pop_front();
        }
        stalled = value - trial_value <= 1e-15 * std::max(1.0, std::abs(value)) ? stalled + 1 : 0;
        z = std::move(trial);
        grad = std::move(trial_grad);
        value = trial_value;
      }
      return it;
    }

    /// Projected Newton (two-metric) on the free variables; returns the number of iterations used.
    int minimize_box_newton(const CollocationNlp &nlp, const Vec &mu, double rho, Vec &z, double tol, int max_iter)
    {
      const AugmentedLagrangian merit(nlp, mu, rho);
      const Vec &lo = nlp.lower();
      const Vec &hi = nlp.upper();
      const Eigen::Index n = z.size();
      Vec grad;
      double value = merit.value_and_gradient(z, grad);
      int it = 0;
      for (; it < max_iter; ++it)
      {
        const double pg = projected_gradient_norm(nlp, z, grad);
        if (pg < tol)
          break;

        const double eps = std::min(1e-3, pg);
        std::vector<Eigen::Index> free_idx;
        std::vector<bool> is_free(n, false);
        for (Eigen::Index i = 0; i < n; ++i)
        {
          const bool active = lo[i] == hi[i] || (z[i] <= lo[i] + eps && grad[i] > 0.0) ||
                              (z[i] >= hi[i] - eps && grad[i] < 0.0);
          if (!active)
          {
            free_idx.push_back(i);
            is_free[i] = true;
          }
        }

        const Vec c = nlp.defects(z);
        const Mat J = nlp.defect_jacobian(z);
        const Mat H = nlp.lagrangian_hessian(z, mu + rho * c) + rho * (J.transpose() * J);
        const Eigen::Index m = static_cast<Eigen::Index>(free_idx.size());
        Mat Hf(m, m);
        Vec gf(m);
        for (Eigen::Index a = 0; a < m; ++a)
        {
          gf[a] = grad[free_idx[a]];
          for (Eigen::Index b = 0; b < m; ++b)
            Hf(a, b) = H(free_idx[a], free_idx[b]);
        }

        // Shift until the reduced Hessian is positive definite.
        Vec df;
        double shift = 0.0;
        const double scale = std::max(1e-12, Hf.diagonal().cwiseAbs().maxCoeff());
        for (int attempt = 0; attempt < 40; ++attempt)
        {
          Eigen::LLT<Mat> llt(Hf + shift * Mat::Identity(m, m));
          if (llt.info() == Eigen::Success)
          {
            df = -llt.solve(gf);
            break;
          }
          shift = shift == 0.0 ? 1e-10 * scale : 10.0 * shift;
        }

        Vec d = Vec::Zero(n);
        for (Eigen::Index a = 0; a < m; ++a)
          d[free_idx[a]] = df.size() == m ? df[a] : -gf[a];
        for (Eigen::Index i = 0; i < n; ++i)
          if (!is_free[i] && lo[i] < hi[i])
            d[i] = -grad[i] / std::max(H(i, i), 1e-12);

        double step = 1.0;
        bool accepted = false;
        Vec trial;
        for (int ls = 0; ls < 60; ++ls, step *= 0.5)
        {
          trial = nlp.project(z + step * d);
          const double tv = merit.value(trial);
          if (std::isfinite(tv) && tv <= value + 1e-4 * grad.dot(trial - z))
          {
            accepted = true;
            break;
          }
        }
        if (!accepted)
          break;
        z = std::move(trial);
        value = merit.value_and_gradient(z, grad);
      }
      return it;
    }

  } // namespace

  CollocationResult solve_nlp(const CollocationNlp &nlp, const Vec &init, const CollocationOptions &options)
  {
    if (init.size() != nlp.decision_size() || !init.allFinite())
      throw ArgumentError("solve_nlp: initial guess must be finite with the decision dimension");

    const int N = nlp.steps();
    const int p = nlp.problem().state_dim();

    Vec z = nlp.project(init);
    Vec mu = Vec::Zero(nlp.defect_count());
    double rho = options.initial_penalty;
    double omega = 1e-2; // inner tolerance
    CollocationResult res;

    double max_defect = nlp.defects(z).lpNorm<Eigen::Infinity>();
    double pg = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < options.max_outer; ++outer)
    {
      const AugmentedLagrangian merit(nlp, mu, rho);
      OuterIterate log;
      log.penalty = rho;
      log.merit_start = merit.value(z);
      log.inner_iterations =
          options.inner == InnerSolver::kProjectedNewton
              ? minimize_box_newton(nlp, mu, rho, z, omega, std::max(1, options.max_inner / 100))
              : minimize_box(nlp, merit, z, omega, options.max_inner, options.lbfgs_memory);
      log.merit_end = merit.value(z);
      const Vec c = nlp.defects(z);
      const double previous_defect = max_defect;
      max_defect = c.lpNorm<Eigen::Infinity>();
      log.max_defect = max_defect;
      res.history.push_back(log);

      // First-order multiplier update every outer iteration; the penalty only
      // grows when the defect fails to shrink by a factor of four.
      mu += rho * c;
      if (max_defect > 0.25 * previous_defect)
        rho = std::min(10.0 * rho, options.max_penalty);
      omega = std::max(0.1 * options.gradient_tol, std::min(0.1 * omega, max_defect));

      const Vec grad = nlp.objective_gradient(z) + nlp.defect_jacobian_transpose_times(z, mu);
      pg = projected_gradient_norm(nlp, z, grad);
      if (max_defect < options.defect_tol && pg < options.gradient_tol)
      {
        res.status = NlpStatus::kConverged;
        break;
      }
    }

    res.z = z;
    res.times.resize(N);
    for (int k = 0; k < N; ++k)
      res.times[k] = k * nlp.problem().delta();
    res.x_traj = nlp.states(z);
    res.u_traj = nlp.inputs(z);
    res.multipliers.resize(N - 1, p);
    for (int k = 0; k + 1 < N; ++k)
      res.multipliers.row(k) = mu.segment(static_cast<Eigen::Index>(k) * p, p).transpose();
    res.costates.resize(N, p);
    res.costates.row(0) = -res.multipliers.row(0);
    res.costates.row(N - 1) = -res.multipliers.row(N - 2);
    for (int k = 1; k + 1 < N; ++k)
      res.costates.row(k) = -0.5 * (res.multipliers.row(k - 1) + res.multipliers.row(k));
    res.cost = nlp.objective(z);
    res.max_defect = max_defect;
    res.projected_gradient = pg;
    return res;
  }

  ClosedLoopResult to_closed_loop(const CollocationResult &result)
  {
    const Eigen::Index N = result.times.size();
    ClosedLoopResult r;
    r.times = result.times;
    r.x_series = result.x_traj;
    r.u_series = result.u_traj.topRows(N - 1);
    r.lambda0_series = result.costates.topRows(N - 1);
    r.disturbance_series = Trajectory::Zero(N, result.x_traj.cols());
    r.running_cost = result.cost;
    return r;
  }

  TrajectoryComparison compare_trajectories(const ClosedLoopResult &a, const ClosedLoopResult &b, double t_from)
  {
    if (a.times.size() != b.times.size() || a.x_series.cols() != b.x_series.cols() ||
        a.x_series.rows() != a.times.size() || b.x_series.rows() != b.times.size())
      throw ArgumentError("compare_trajectories: trajectories are not on the same grid");
    TrajectoryComparison out;
    int used = 0;
    for (Eigen::Index k = 0; k < a.times.size(); ++k)
    {
      if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(1.0, std::abs(a.times[k])))
        throw ArgumentError("compare_trajectories: time grids differ");
      if (a.times[k] < t_from - 1e-12)
        continue;
      const double dev = (a.x_series.row(k) - b.x_series.row(k)).lpNorm<Eigen::Infinity>();
      out.max_state_deviation = std::max(out.max_state_deviation, dev);
      out.mean_state_deviation += dev;
      ++used;
    }
    if (used == 0)
      throw ArgumentError("compare_trajectories: no samples at or after t_from");
    out.mean_state_deviation /= used;
    out.cost_gap = a.running_cost - b.running_cost;
    return out;
  }

} // namespace conn
