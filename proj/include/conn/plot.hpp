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

#include <filesystem>
#include <string>
#include <vector>

namespace conn
{

  struct PlotSeries
  {
    std::string label;
    Vec t;
    Vec y;
    bool dashed = false;
  };

  struct PlotPanel
  {
    std::string title;
    std::string y_label;
    std::vector<PlotSeries> series;
  };

  /// Static SVG with one stacked panel per entry, fixed view box, axes and legend.
  /// Output depends only on the data. Throws ArgumentError on empty or misaligned input.
  std::string render_svg(const std::vector<PlotPanel> &panels, const std::string &title = {});

  void emit_plot(const std::vector<PlotPanel> &panels, const std::filesystem::path &path,
                 const std::string &title = {});

} // namespace conn
