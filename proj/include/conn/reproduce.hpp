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
#include "conn/training.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace conn
{

  enum class Figure
  {
    kFig3a, ///< unconstrained, x0 = 20
    kFig3b, ///< unconstrained, x0 = -10
    kFig4,  ///< input bounds +-20.1, x0 = -4
    kFig5,  ///< disturbance schedule, both scenarios
  };

  Figure parse_figure(std::string_view name);
  std::string_view figure_name(Figure f);

  struct ReproduceOptions
  {
    std::filesystem::path out_dir = ".";
    /// Existing artifacts are read only. Missing ones are built in out_dir with a warning.
    std::filesystem::path dataset;
    std::filesystem::path model;        ///< continuity weight 1
    std::filesystem::path model_nocont; ///< continuity weight 0
    ConnArchitecture architecture;
    TrainConfig training;
    bool reference = true;
    std::function<void(const std::string &)> warn;
    std::function<void(const std::string &)> progress;
  };

  /// Runs the configuration of one figure and writes CSV files plus an SVG; returns the written paths.
  std::vector<std::filesystem::path> reproduce(Figure figure, const ReproduceOptions &options);

} // namespace conn
