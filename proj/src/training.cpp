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

#include "conn/training.hpp"

#include "conn/errors.hpp"
#include "conn/numfmt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace conn
{

  void TrainConfig::validate() const
  {
    if (n_epoch < 0)
      throw ArgumentError("TrainConfig: n_epoch must be non-negative");
    if (!(learning_rate > 0.0))
      throw ArgumentError("TrainConfig: learning rate must be positive");
    if (!(lr_decay > 0.0))
      throw ArgumentError("TrainConfig: lr_decay must be positive");
    if (!(continuity_weight >= 0.0))
      throw ArgumentError("TrainConfig: continuity_weight must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw ArgumentError("TrainConfig: invalid Adam hyperparameters");
    if (continuity_substeps < 1)
      throw ArgumentError("TrainConfig: continuity_substeps must be >= 1");
  }

  std::uint64_t TrainConfig::hash() const
  {
    std::ostringstream os;
    os << "n_epoch=" << n_epoch << ";learning_rate=" << format_double(learning_rate)
       << ";lr_decay=" << format_double(lr_decay) << ";continuity_weight=" << format_double(continuity_weight)
       << ";seed=" << seed << ";beta1=" << format_double(beta1) << ";beta2=" << format_double(beta2)
       << ";epsilon=" << format_double(epsilon) << ";shuffle=" << shuffle
       << ";scheme=" << (continuity_scheme == StepScheme::kRk4 ? "rk4" : "euler")
       << ";substeps=" << continuity_substeps;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : os.str())
    {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  double loss_prediction(const Mat &pred, const Mat &target)
  {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
      throw ArgumentError("loss_prediction: shape mismatch");
    if (pred.size() == 0)
      throw ArgumentError("loss_prediction: empty trajectories");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
  }

  namespace
  {

    /// Continuity loss and, optionally, its gradient with respect to lambda_pred (n x p).
    ContinuityLoss continuity_impl(const OcpProblem &problem, const Mat &x_window, const Mat &lambda_pred,
                                   double delta, StepScheme scheme, int substeps, Mat *d_lambda)
    {
      const Eigen::Index n = x_window.rows();
      const int p = problem.state_dim();
      if (lambda_pred.rows() != n || x_window.cols() != p || lambda_pred.cols() != p)
        throw ArgumentError("loss_continuity: window and prediction shapes differ");
      if (n < 2)
        throw ArgumentError("loss_continuity: need a horizon of at least 2");

      const double norm = 1.0 / static_cast<double>(n - 1);
      ContinuityLoss out;
      if (d_lambda)
        d_lambda->setZero(n, p);
      for (Eigen::Index j = 0; j + 1 < n; ++j)
      {
        const Vec x = x_window.row(j).transpose();
        const Vec lam = lambda_pred.row(j).transpose();
        try
        {
          if (!d_lambda)
          {
            const PmpState s = integrate_pmp_ode(problem, x, lam, delta, substeps, scheme);
            const Vec ex = x_window.row(j + 1).transpose() - s.x;
            const Vec el = lambda_pred.row(j + 1).transpose() - s.lambda;
            out.value += norm * (ex.squaredNorm() + el.squaredNorm());
            continue;
          }
          const PmpFlowStep s = integrate_pmp_ode_with_jacobian(problem, x, lam, delta, substeps, scheme);
          const Vec ex = x_window.row(j + 1).transpose() - s.x;
          const Vec el = lambda_pred.row(j + 1).transpose() - s.lambda;
          out.value += norm * (ex.squaredNorm() + el.squaredNorm());
          d_lambda->row(j + 1) += (2.0 * norm * el).transpose();
          const Mat dx_dlam = s.jacobian.topRightCorner(p, p);
          const Mat dl_dlam = s.jacobian.bottomRightCorner(p, p);
          d_lambda->row(j) -= (2.0 * norm * (dx_dlam.transpose() * ex + dl_dlam.transpose() * el)).transpose();
        }
        catch (const DivergenceError &)
        {
          out.value += kDivergencePenalty;
          out.diverged = true;
        }
      }
      return out;
    }

  } // namespace

  ContinuityLoss loss_continuity(const OcpProblem &problem, const Mat &x_window, const Mat &lambda_pred,
                                 double delta, StepScheme scheme, int substeps)
  {
    return continuity_impl(problem, x_window, lambda_pred, delta, scheme, substeps, nullptr);
  }

  Vec Gradients::flat() const
  {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      total += weights[l].size() + biases[l].size();
    Vec out(total);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
    {
      out.segment(at, weights[l].size()) = weights[l].reshaped();
      at += weights[l].size();
      out.segment(at, biases[l].size()) = biases[l];
      at += biases[l].size();
    }
    return out;
  }

  Gradients gradients(const ConnModel &model, const OcpProblem &problem, const Window &window,
                      const TrainConfig &config)
  {
    const int n = model.horizon();
    const int p = model.state_dim();
    if (window.x_window.rows() != n || window.lambda_window.rows() != n || window.x_window.cols() != p ||
        window.lambda_window.cols() != p)
      throw ArgumentError("gradients: window shape does not match the model horizon");

    ForwardTrace trace;
    const Vec flat = forward_traced(model, window.x_window.row(0).transpose(), trace);
    Mat pred(n, p);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < p; ++i)
        pred(j, i) = flat[j * p + i];

    Gradients g;
    g.prediction_loss = loss_prediction(pred, window.lambda_window);
    Mat d_pred = (2.0 / static_cast<double>(n * p)) * (pred - window.lambda_window);

    if (config.continuity_weight > 0.0)
    {
      Mat d_cont;
      const ContinuityLoss c = continuity_impl(problem, window.x_window, pred, problem.delta(),
                                               config.continuity_scheme, config.continuity_substeps, &d_cont);
      g.continuity_loss = c.value;
      g.diverged = c.diverged;
      d_pred += config.continuity_weight * d_cont;
    }
    else
    {
      const ContinuityLoss c = continuity_impl(problem, window.x_window, pred, problem.delta(),
                                               config.continuity_scheme, config.continuity_substeps, nullptr);
      g.continuity_loss = c.value;
      g.diverged = c.diverged;
    }

    Vec d_out(n * p);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < p; ++i)
        d_out[j * p + i] = d_pred(j, i);
    backpropagate(model, trace, d_out, g.weights, g.biases);
    return g;
  }

  namespace
  {

    struct AdamState
    {
      std::vector<Mat> mw, vw;
      std::vector<Vec> mb, vb;
      long long t = 0;

      explicit AdamState(const ConnModel &model)
      {
        for (std::size_t l = 0; l < model.layer_count(); ++l)
        {
          mw.push_back(Mat::Zero(model.weights()[l].rows(), model.weights()[l].cols()));
          vw.push_back(mw.back());
          mb.push_back(Vec::Zero(model.biases()[l].size()));
          vb.push_back(mb.back());
        }
      }

      template <typename P, typename G>
      static void apply(P &param, P &m, P &v, const G &grad, const TrainConfig &c, double lr, double bc1,
                        double bc2)
      {
        m = c.beta1 * m + (1.0 - c.beta1) * grad;
        v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
      }

      void step(ConnModel &model, const Gradients &g, const TrainConfig &c, double lr)
      {
        ++t;
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
        for (std::size_t l = 0; l < model.layer_count(); ++l)
        {
          apply(model.weights()[l], mw[l], vw[l], g.weights[l], c, lr, bc1, bc2);
          apply(model.biases()[l], mb[l], vb[l], g.biases[l], c, lr, bc1, bc2);
        }
      }
    };

  } // namespace

  TrainResult train(ConnModel model, const Dataset &dataset, const OcpProblem &problem,
                    const TrainConfig &config, const std::function<void(const EpochLog &)> &on_epoch)
  {
    config.validate();
    const int n = model.horizon();
    if (dataset.entries.empty())
      throw ArgumentError("train: empty dataset");
    if (n >= dataset.steps)
      throw ArgumentError("train: horizon must be shorter than the trajectories");
    if (dataset.state_dim() != model.state_dim() || problem.state_dim() != model.state_dim())
      throw ArgumentError("train: state dimension mismatch");
    if (std::abs(dataset.delta - problem.delta()) > 1e-12 * problem.delta())
      throw ArgumentError("train: dataset time step differs from the problem time step");

    TrainResult result{model, {}, 0, false};
    if (config.n_epoch == 0)
      return result;

    const int per_traj = dataset.steps - n;
    std::vector<std::pair<int, int>> order;
    order.reserve(static_cast<std::size_t>(dataset.count()) * per_traj);
    for (int i = 0; i < dataset.count(); ++i)
      for (int k = 0; k < per_traj; ++k)
        order.emplace_back(i, k);

    std::mt19937_64 rng(config.seed);
    AdamState adam(model);
    double lr = config.learning_rate;
    Window window;
    for (int epoch = 0; epoch < config.n_epoch; ++epoch)
    {
      if (config.shuffle)
        std::shuffle(order.begin(), order.end(), rng);

      EpochLog entry;
      entry.epoch = epoch;
      entry.learning_rate = lr;
      bool failed = false;
      for (const auto &[i, k] : order)
      {
        const TrajectoryPair &pair = dataset.entries[i];
        window.k = k;
        window.x_window = pair.x_traj.middleRows(k, n);
        window.lambda_window = pair.lambda_traj.middleRows(k, n);
        const Gradients g = gradients(model, problem, window, config);
        const double total = g.total_loss(config.continuity_weight);
        if (!std::isfinite(total) || !g.flat().allFinite())
        {
          failed = true;
          break;
        }
        adam.step(model, g, config, lr);
        if (!model.all_finite())
        {
          failed = true;
          break;
        }
        entry.prediction += g.prediction_loss;
        entry.continuity += g.continuity_loss;
        ++entry.updates;
        ++result.updates;
      }
      if (failed)
      {
        result.diverged = true;
        return result;
      }
      entry.prediction /= static_cast<double>(entry.updates);
      entry.continuity /= static_cast<double>(entry.updates);
      entry.total = entry.prediction + config.continuity_weight * entry.continuity;
      result.log.push_back(entry);
      model.set_train_config_hash(config.hash());
      result.model = model;
      if (on_epoch)
        on_epoch(entry);
      lr *= config.lr_decay;
    }
    return result;
  }

  void write_loss_log(const std::vector<EpochLog> &log, double continuity_weight,
                      const std::filesystem::path &path)
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("write_loss_log: cannot open " + path.string());
    out << "epoch,prediction_loss,continuity_loss,total_loss,continuity_weight,learning_rate,updates\n";
    for (const EpochLog &e : log)
      out << e.epoch << ',' << format_double(e.prediction) << ',' << format_double(e.continuity) << ','
          << format_double(e.total) << ',' << format_double(continuity_weight) << ','
          << format_double(e.learning_rate) << ',' << e.updates << '\n';
    if (!out)
      throw IoError("write_loss_log: write failed for " + path.string());
  }

} // namespace conn
