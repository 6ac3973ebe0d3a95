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

#include "conn/dataset.hpp"
#include "conn/model.hpp"
#include "conn/tpbvp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

namespace conn
{

  struct TrainConfig
  {
    int n_epoch = 30;
    double learning_rate = 1e-3;
    /// Multiplier applied to the learning rate after every epoch.
    double lr_decay = 0.9;
    double continuity_weight = 1.0;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool shuffle = false;
    StepScheme continuity_scheme = StepScheme::kRk4;
    int continuity_substeps = 4;

    void validate() const;
    /// FNV-1a of the canonical text form; stored with trained models.
    std::uint64_t hash() const;
  };

  /// Mean over all n * p squared differences. Throws ArgumentError on shape mismatch.
  double loss_prediction(const Mat &pred, const Mat &target);

  struct ContinuityLoss
  {
    double value = 0.0;
    bool diverged = false;
  };

  /// Penalty charged for each one-step integration that blows up.
  constexpr double kDivergencePenalty = 1e6;

  /**
   * Integrates every (x_window[j], lambda_pred[j]) forward by delta and
   * compares with the next window sample:
   *   1/(n-1) sum_{j=0}^{n-2} |x_window[j+1] - x_int[j]|^2 + |lambda_pred[j+1] - lambda_int[j]|^2
   */
  ContinuityLoss loss_continuity(const OcpProblem &problem, const Mat &x_window, const Mat &lambda_pred,
                                 double delta, StepScheme scheme = StepScheme::kRk4, int substeps = 4);

  struct Gradients
  {
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    double prediction_loss = 0.0;
    double continuity_loss = 0.0;
    bool diverged = false;

    double total_loss(double continuity_weight) const
    {
      return prediction_loss + continuity_weight * continuity_loss;
    }
    /// Same ordering as ConnModel::parameters().
    Vec flat() const;
  };

  /// Exact reverse-mode gradient of L_prediction + w * L_continuity for one window.
  Gradients gradients(const ConnModel &model, const OcpProblem &problem, const Window &window,
                      const TrainConfig &config);

  struct EpochLog
  {
    int epoch = 0;
    double prediction = 0.0; ///< mean over the epoch's updates
    double continuity = 0.0;
    double total = 0.0;
    double learning_rate = 0.0;
    long long updates = 0;
  };

  struct TrainResult
  {
    ConnModel model;
    std::vector<EpochLog> log;
    long long updates = 0;
    /// Loss or parameters became non-finite; `model` is the last good end-of-epoch checkpoint.
    bool diverged = false;
  };

  /**
   * Per-window Adam updates in the order epochs x trajectories x windows
   * (k = 0..N-n-1), one update per window.
   */
  TrainResult train(ConnModel model, const Dataset &dataset, const OcpProblem &problem,
                    const TrainConfig &config,
                    const std::function<void(const EpochLog &)> &on_epoch = {});

  void write_loss_log(const std::vector<EpochLog> &log, double continuity_weight,
                      const std::filesystem::path &path);

} // namespace conn
