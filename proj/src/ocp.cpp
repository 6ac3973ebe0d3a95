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

#include "conn/ocp.hpp"

#include "conn/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace conn
{

  namespace
  {

    void require_dim(const Vec &v, int dim, const char *what)
    {
      if (v.size() != dim)
      {
        std::ostringstream os;
        os << what << ": expected dimension " << dim << ", got " << v.size();
        throw ArgumentError(os.str());
      }
    }

    double fd_step(double v) { return 1e-6 * std::max(1.0, std::abs(v)); }

  } // namespace

  OcpProblem::OcpProblem(OcpDefinition definition) : def_(std::move(definition))
  {
    const int p = def_.state_dim;
    const int q = def_.input_dim;
    if (p < 1 || q < 1)
      throw ArgumentError("OcpProblem: state_dim and input_dim must be positive");
    if (!def_.f || !def_.df_dx || !def_.g || !def_.dg_dx)
      throw ArgumentError("OcpProblem: f, df_dx, g and dg_dx are required");
    if (def_.Q.rows() != p || def_.Q.cols() != p)
      throw ArgumentError("OcpProblem: Q must be p x p");
    if (def_.R.rows() != q || def_.R.cols() != q)
      throw ArgumentError("OcpProblem: R must be q x q");
    if ((def_.Q - def_.Q.transpose()).norm() > 1e-12 * std::max(1.0, def_.Q.norm()))
      throw ArgumentError("OcpProblem: Q must be symmetric");
    if ((def_.R - def_.R.transpose()).norm() > 1e-12 * std::max(1.0, def_.R.norm()))
      throw ArgumentError("OcpProblem: R must be symmetric");

    Eigen::SelfAdjointEigenSolver<Mat> q_eig(def_.Q, Eigen::EigenvaluesOnly);
    if (q_eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, def_.Q.norm()))
      throw ArgumentError("OcpProblem: Q must be positive semi-definite");
    Eigen::SelfAdjointEigenSolver<Mat> r_eig(def_.R, Eigen::EigenvaluesOnly);
    if (!(r_eig.eigenvalues().minCoeff() > 0.0))
      throw ArgumentError("OcpProblem: R must be positive definite");
    r_llt_.compute(def_.R);
    if (r_llt_.info() != Eigen::Success)
      throw ArgumentError("OcpProblem: R factorization failed");
    r_diagonal_ = def_.R.isDiagonal(0.0);

    require_dim(def_.u_min, q, "OcpProblem u_min");
    require_dim(def_.u_max, q, "OcpProblem u_max");
    require_dim(def_.x_target, p, "OcpProblem x_target");
    for (int i = 0; i < q; ++i)
    {
      if (std::isnan(def_.u_min[i]) || std::isnan(def_.u_max[i]) || def_.u_min[i] > def_.u_max[i])
        throw ArgumentError("OcpProblem: u_min must not exceed u_max");
    }
    if (!def_.x_target.allFinite())
      throw ArgumentError("OcpProblem: x_target must be finite");

    if (!(def_.delta > 0.0) || !(def_.t_final > 0.0) || !std::isfinite(def_.t_final))
      throw ArgumentError("OcpProblem: t_final and delta must be positive");
    const double ratio = def_.t_final / def_.delta;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
      throw ArgumentError("OcpProblem: t_final / delta must be an integer");
    steps_ = static_cast<int>(rounded) + 1;
  }

  bool OcpProblem::has_second_derivatives() const
  {
    return static_cast<bool>(def_.d2f_dx2) && static_cast<bool>(def_.d2g_dx2);
  }

  MatStack OcpProblem::d2f_dx2(const Vec &x) const
  {
    if (def_.d2f_dx2)
      return def_.d2f_dx2(x);
    MatStack out(def_.state_dim);
    for (int i = 0; i < def_.state_dim; ++i)
    {
      const double h = fd_step(x[i]);
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      out[i] = (def_.df_dx(xp) - def_.df_dx(xm)) / (2.0 * h);
    }
    return out;
  }

  std::vector<MatStack> OcpProblem::d2g_dx2(const Vec &x) const
  {
    if (def_.d2g_dx2)
      return def_.d2g_dx2(x);
    const int p = def_.state_dim;
    std::vector<MatStack> out(p, MatStack(p));
    for (int i = 0; i < p; ++i)
    {
      const double h = fd_step(x[i]);
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const MatStack gp = def_.dg_dx(xp);
      const MatStack gm = def_.dg_dx(xm);
      for (int m = 0; m < p; ++m)
        out[m][i] = (gp[m] - gm[m]) / (2.0 * h);
    }
    return out;
  }

  OcpProblem OcpProblem::with_bounds(const Vec &u_min, const Vec &u_max) const
  {
    OcpDefinition d = def_;
    d.u_min = u_min;
    d.u_max = u_max;
    return OcpProblem(std::move(d));
  }

  OcpProblem OcpProblem::with_grid(double t_final, double delta) const
  {
    OcpDefinition d = def_;
    d.t_final = t_final;
    d.delta = delta;
    return OcpProblem(std::move(d));
  }

  OcpProblem OcpProblem::unbounded() const
  {
    const double inf = std::numeric_limits<double>::infinity();
    return with_bounds(Vec::Constant(def_.input_dim, -inf), Vec::Constant(def_.input_dim, inf));
  }

  Vec dynamics_rhs(const OcpProblem &problem, const Vec &x, const Vec &u)
  {
    require_dim(x, problem.state_dim(), "dynamics_rhs x");
    require_dim(u, problem.input_dim(), "dynamics_rhs u");
    return problem.f(x) + problem.g(x) * u;
  }

  double hamiltonian(const OcpProblem &problem, const PmpPoint &pt)
  {
    require_dim(pt.lambda, problem.state_dim(), "hamiltonian lambda");
    const Vec xdot = dynamics_rhs(problem, pt.x, pt.u);
    return 0.5 * pt.x.dot(problem.Q() * pt.x) + 0.5 * pt.u.dot(problem.R() * pt.u) +
           pt.lambda.dot(xdot);
  }

  Vec costate_rhs(const OcpProblem &problem, const Vec &x, const Vec &u, const Vec &lambda)
  {
    const int p = problem.state_dim();
    require_dim(x, p, "costate_rhs x");
    require_dim(u, problem.input_dim(), "costate_rhs u");
    require_dim(lambda, p, "costate_rhs lambda");
    Vec out = -problem.Q() * x - problem.df_dx(x).transpose() * lambda;
    // d/dx_i of lambda' g(x) u is lambda' (dg/dx_i) u
    const MatStack dg = problem.dg_dx(x);
    for (int i = 0; i < p; ++i)
      out[i] -= lambda.dot(dg[i] * u);
    return out;
  }

  Vec hamiltonian_input_gradient(const OcpProblem &problem, const Vec &x, const Vec &u,
                                 const Vec &lambda)
  {
    require_dim(x, problem.state_dim(), "dH/du x");
    require_dim(u, problem.input_dim(), "dH/du u");
    require_dim(lambda, problem.state_dim(), "dH/du lambda");
    return problem.R() * u + problem.g(x).transpose() * lambda;
  }

  Vec unconstrained_control(const OcpProblem &problem, const Vec &x, const Vec &lambda)
  {
    require_dim(x, problem.state_dim(), "unconstrained_control x");
    require_dim(lambda, problem.state_dim(), "unconstrained_control lambda");
    return -problem.solve_r(Vec(problem.g(x).transpose() * lambda));
  }

  Vec pmp_rhs(const OcpProblem &problem, const Vec &z)
  {
    const int p = problem.state_dim();
    require_dim(z, 2 * p, "pmp_rhs z");
    const Vec x = z.head(p);
    const Vec lambda = z.tail(p);
    const Vec u = unconstrained_control(problem, x, lambda);
    Vec out(2 * p);
    out.head(p) = dynamics_rhs(problem, x, u);
    out.tail(p) = costate_rhs(problem, x, u, lambda);
    return out;
  }

  void pmp_rhs_and_jacobian(const OcpProblem &problem, const Vec &z, Vec &rhs, Mat *jac)
  {
    const int p = problem.state_dim();
    const int q = problem.input_dim();
    require_dim(z, 2 * p, "pmp_rhs_and_jacobian z");
    const auto x = z.head(p);
    const auto lambda = z.tail(p);
    const Vec xv = x;

    const Mat g = problem.g(xv);
    const Mat fx = problem.df_dx(xv);
    const MatStack gx = problem.dg_dx(xv);
    const Vec u = -problem.solve_r(Vec(g.transpose() * lambda));

    rhs.resize(2 * p);
    rhs.head(p) = problem.f(xv) + g * u;
    rhs.tail(p) = -problem.Q() * x - fx.transpose() * lambda;
    for (int i = 0; i < p; ++i)
      rhs[p + i] -= lambda.dot(gx[i] * u);
    if (!jac)
      return;

    const MatStack fxx = problem.d2f_dx2(xv);
    const std::vector<MatStack> gxx = problem.d2g_dx2(xv);
    Mat du_dx(q, p);
    for (int i = 0; i < p; ++i)
      du_dx.col(i) = -problem.solve_r(Vec(gx[i].transpose() * lambda));
    const Mat du_dl = -problem.solve_r(Mat(g.transpose()));

    jac->resize(2 * p, 2 * p);
    for (int i = 0; i < p; ++i)
      jac->block(0, i, p, 1) = fx.col(i) + gx[i] * u + g * du_dx.col(i);
    jac->block(0, p, p, p) = g * du_dl;

    for (int m = 0; m < p; ++m)
    {
      const Mat &gm = gx[m];
      for (int i = 0; i < p; ++i)
      {
        (*jac)(p + m, i) = -problem.Q()(m, i) - fxx[i].col(m).dot(lambda) - lambda.dot(gxx[m][i] * u) -
                           lambda.dot(gm * du_dx.col(i));
      }
      const Vec gm_u = gm * u;
      const Vec lam_gm_dudl = (lambda.transpose() * gm * du_dl).transpose();
      for (int j = 0; j < p; ++j)
        (*jac)(p + m, p + j) = -fx(j, m) - gm_u[j] - lam_gm_dudl[j];
    }
  }

  Mat pmp_rhs_jacobian(const OcpProblem &problem, const Vec &z)
  {
    Vec rhs;
    Mat jac;
    pmp_rhs_and_jacobian(problem, z, rhs, &jac);
    return jac;
  }

  std::vector<double> first_derivative_weights(const std::vector<double> &offsets, double at)
  {
    // Fornberg (1988), derivative orders 0 and 1.
    const std::size_t n = offsets.size();
    if (n < 2)
      throw ArgumentError("first_derivative_weights: need at least two nodes");
    std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
    double c1 = 1.0;
    double c4 = offsets[0] - at;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i)
    {
      const int mn = std::min<int>(static_cast<int>(i), 1);
      double c2 = 1.0;
      const double c5 = c4;
      c4 = offsets[i] - at;
      for (std::size_t j = 0; j < i; ++j)
      {
        const double c3 = offsets[i] - offsets[j];
        c2 *= c3;
        if (j == i - 1)
        {
          for (int k = mn; k >= 1; --k)
            c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
          c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
        }
        for (int k = mn; k >= 1; --k)
          c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
        c[j][0] = c4 * c[j][0] / c3;
      }
      c1 = c2;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = c[i][1];
    return w;
  }

  double pmp_residual(const OcpProblem &problem, const Trajectory &x_traj,
                      const Trajectory &lambda_traj, const Trajectory &u_traj)
  {
    const int p = problem.state_dim();
    const int q = problem.input_dim();
    const Eigen::Index n = x_traj.rows();
    if (lambda_traj.rows() != n || u_traj.rows() != n)
      throw ArgumentError("pmp_residual: trajectories must have equal length");
    if (x_traj.cols() != p || lambda_traj.cols() != p || u_traj.cols() != q)
      throw ArgumentError("pmp_residual: trajectory width does not match problem dimensions");
    if (n < 3)
      throw ArgumentError("pmp_residual: need at least 3 samples");

    constexpr Eigen::Index kStencil = 9;
    const Eigen::Index width = std::min(kStencil, n);
    const double delta = problem.delta();

    double dyn = 0.0;
    for (Eigen::Index k = 1; k + 1 < n; ++k)
    {
      const Eigen::Index start = std::clamp<Eigen::Index>(k - width / 2, 0, n - width);
      std::vector<double> offsets(width);
      for (Eigen::Index j = 0; j < width; ++j)
        offsets[j] = static_cast<double>(start + j - k);
      const std::vector<double> w = first_derivative_weights(offsets, 0.0);

      Vec xdot = Vec::Zero(p);
      Vec ldot = Vec::Zero(p);
      for (Eigen::Index j = 0; j < width; ++j)
      {
        xdot += w[j] * x_traj.row(start + j).transpose();
        ldot += w[j] * lambda_traj.row(start + j).transpose();
      }
      xdot /= delta;
      ldot /= delta;

      const Vec x = x_traj.row(k).transpose();
      const Vec u = u_traj.row(k).transpose();
      const Vec lambda = lambda_traj.row(k).transpose();
      const Vec fx = dynamics_rhs(problem, x, u);
      const Vec fl = costate_rhs(problem, x, u, lambda);
      dyn = std::max(dyn, (xdot - fx).lpNorm<Eigen::Infinity>() /
                              std::max(1.0, fx.lpNorm<Eigen::Infinity>()));
      dyn = std::max(dyn, (ldot - fl).lpNorm<Eigen::Infinity>() /
                              std::max(1.0, fl.lpNorm<Eigen::Infinity>()));
    }

    double stationarity = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
    {
      const Vec u = u_traj.row(k).transpose();
      bool inactive = true;
      for (int i = 0; i < q; ++i)
        inactive = inactive && u[i] > problem.u_min()[i] && u[i] < problem.u_max()[i];
      if (!inactive)
        continue;
      const Vec dhdu = hamiltonian_input_gradient(problem, x_traj.row(k).transpose(), u,
                                                  lambda_traj.row(k).transpose());
      stationarity = std::max(stationarity, dhdu.lpNorm<Eigen::Infinity>());
    }
    return dyn + stationarity;
  }

} // namespace conn
