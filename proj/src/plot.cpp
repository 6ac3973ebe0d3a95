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

#include "conn/plot.hpp"

#include "conn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace conn
{

  namespace
  {

    constexpr double kWidth = 820.0;
    constexpr double kPanelHeight = 300.0;
    constexpr double kLeft = 70.0;
    constexpr double kRight = 20.0;
    constexpr double kTop = 40.0;
    constexpr double kBottom = 45.0;
    constexpr const char *kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::string num(double v)
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", v);
      return buf;
    }

    std::string tick_label(double v)
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
      return buf;
    }

    std::string escape(const std::string &s)
    {
      std::string out;
      for (char c : s)
      {
        switch (c)
        {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
      }
      return out;
    }

    double nice_step(double span)
    {
      const double raw = span / 5.0;
      const double mag = std::pow(10.0, std::floor(std::log10(raw)));
      const double r = raw / mag;
      return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
    }

    struct Range
    {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();

      void add(const Vec &v)
      {
        for (double x : v)
          if (std::isfinite(x))
          {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
          }
      }
      void pad()
      {
        if (!std::isfinite(lo))
          lo = -1.0, hi = 1.0;
        if (hi - lo < 1e-12)
          lo -= 1.0, hi += 1.0;
        const double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
      }
    };

  } // namespace

  std::string render_svg(const std::vector<PlotPanel> &panels, const std::string &title)
  {
    if (panels.empty())
      throw ArgumentError("plot: no panels");
    for (const PlotPanel &panel : panels)
    {
      if (panel.series.empty())
        throw ArgumentError("plot: panel '" + panel.title + "' has no series");
      for (const PlotSeries &s : panel.series)
        if (s.t.size() == 0 || s.t.size() != s.y.size())
          throw ArgumentError("plot: series '" + s.label + "' is empty or misaligned");
    }

    const double height = kTop + kPanelHeight * static_cast<double>(panels.size());
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(kWidth) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(height) << "\" fill=\"white\"/>\n";
    if (!title.empty())
      svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
          << "</text>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi)
    {
      const PlotPanel &panel = panels[pi];
      Range tr, yr;
      for (const PlotSeries &s : panel.series)
      {
        tr.add(s.t);
        yr.add(s.y);
      }
      if (!std::isfinite(tr.lo) || tr.hi - tr.lo < 1e-12)
        tr.pad();
      yr.pad();

      const double y0 = kTop + kPanelHeight * static_cast<double>(pi) + 20.0;
      const double ph = kPanelHeight - 20.0 - kBottom;
      const double pw = kWidth - kLeft - kRight;
      auto sx = [&](double t) { return kLeft + (t - tr.lo) / (tr.hi - tr.lo) * pw; };
      auto sy = [&](double y) { return y0 + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

      svg << "<g>\n";
      svg << "<text x=\"" << num(kLeft) << "\" y=\"" << num(y0 - 6) << "\" font-size=\"13\">" << escape(panel.title)
          << "</text>\n";
      svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(y0) << "\" width=\"" << num(pw) << "\" height=\""
          << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

      const double ts = nice_step(tr.hi - tr.lo);
      for (double t = std::ceil(tr.lo / ts) * ts; t <= tr.hi + 1e-9 * ts; t += ts)
        svg << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << num(y0 + ph) << "\" x2=\"" << num(sx(t)) << "\" y2=\""
            << num(y0 + ph + 4) << "\" stroke=\"black\"/><text x=\"" << num(sx(t)) << "\" y=\"" << num(y0 + ph + 17)
            << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
      const double ys = nice_step(yr.hi - yr.lo);
      for (double y = std::ceil(yr.lo / ys) * ys; y <= yr.hi + 1e-9 * ys; y += ys)
        svg << "<line x1=\"" << num(kLeft - 4) << "\" y1=\"" << num(sy(y)) << "\" x2=\"" << num(kLeft + pw)
            << "\" y2=\"" << num(sy(y)) << "\" stroke=\"#dddddd\"/><text x=\"" << num(kLeft - 7) << "\" y=\""
            << num(sy(y) + 4) << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
      svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(y0 + ph + 34)
          << "\" text-anchor=\"middle\">t [s]</text>\n";
      svg << "<text transform=\"translate(16," << num(y0 + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
          << escape(panel.y_label) << "</text>\n";

      for (std::size_t si = 0; si < panel.series.size(); ++si)
      {
        const PlotSeries &s = panel.series[si];
        const char *color = kColors[si % std::size(kColors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
        if (s.dashed)
          svg << " stroke-dasharray=\"6,4\"";
        svg << " points=\"";
        bool first = true;
        for (Eigen::Index k = 0; k < s.t.size(); ++k)
        {
          if (!std::isfinite(s.y[k]))
            continue;
          svg << (first ? "" : " ") << num(sx(s.t[k])) << ',' << num(sy(s.y[k]));
          first = false;
        }
        svg << "\"/>\n";
        const double ly = y0 + 14.0 + 16.0 * static_cast<double>(si);
        const double lx = kLeft + pw - 190.0;
        svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 24) << "\" y2=\""
            << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"1.8\""
            << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/><text x=\"" << num(lx + 30) << "\" y=\""
            << num(ly) << "\">" << escape(s.label) << "</text>\n";
      }
      svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
  }

  void emit_plot(const std::vector<PlotPanel> &panels, const std::filesystem::path &path, const std::string &title)
  {
    const std::string text = render_svg(panels, title);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text))
      throw IoError("cannot write plot " + path.string());
  }

} // namespace conn
