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

#include "conn/reproduce.hpp"

#include "conn/collocation.hpp"
#include "conn/control.hpp"
#include "conn/dataset.hpp"
#include "conn/errors.hpp"
#include "conn/plot.hpp"
#include "conn/problems.hpp"
#include "conn/results_io.hpp"

#include <optional>

namespace conn
{

  Figure parse_figure(std::string_view name)
  {
    if (name == "fig3a")
      return Figure::kFig3a;
    if (name == "fig3b")
      return Figure::kFig3b;
    if (name == "fig4")
      return Figure::kFig4;
    if (name == "fig5")
      return Figure::kFig5;
    throw ArgumentError("unknown figure '" + std::string(name) + "' (expected fig3a, fig3b, fig4 or fig5)");
  }

  std::string_view figure_name(Figure f)
  {
    switch (f)
    {
    case Figure::kFig3a: return "fig3a";
    case Figure::kFig3b: return "fig3b";
    case Figure::kFig4: return "fig4";
    case Figure::kFig5: return "fig5";
    }
    return "";
  }

  namespace
  {

    namespace fs = std::filesystem;

    struct Run
    {
      std::string label;
      std::string file;
      ClosedLoopResult result;
      bool dashed = false;
    };

    class Reproducer
    {
    public:
      Reproducer(const ReproduceOptions &options) : opt_(options), problem_(paper1d()) {}

      const ConnModel &model(bool continuity)
      {
        std::optional<ConnModel> &slot = continuity ? with_ : without_;
        if (slot)
          return *slot;
        fs::path path = continuity ? opt_.model : opt_.model_nocont;
        if (path.empty())
          path = opt_.out_dir / (continuity ? "conn_w1.model" : "conn_w0.model");
        if (fs::exists(path))
        {
          slot = load_model(path);
        }
        else
        {
          TrainConfig cfg = opt_.training;
          cfg.continuity_weight = continuity ? 1.0 : 0.0;
          warn("model " + path.string() + " not found; training one with default settings (w=" +
               (continuity ? std::string("1") : std::string("0")) + ")");
          const ConnModel init = ConnModel::initialize(opt_.architecture, cfg.seed);
          TrainResult tr = train(init, data(), problem_, cfg, [&](const EpochLog &e) {
            say("epoch " + std::to_string(e.epoch + 1) + "/" + std::to_string(cfg.n_epoch));
          });
          if (tr.diverged)
            warn("training diverged; using the last good checkpoint");
          slot = std::move(tr.model);
          fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
          save_model(*slot, path);
        }
        return *slot;
      }

      std::vector<fs::path> run(Figure fig)
      {
        const DisturbanceSchedule none;
        const OcpProblem bounded = problem_.with_bounds(Vec::Constant(1, -20.1), Vec::Constant(1, 20.1));
        const std::string name(figure_name(fig));
        switch (fig)
        {
        case Figure::kFig3a:
          return emit(name, "unseen initial state x0 = 20", {scenario(problem_, 20.0, none, false, "")});
        case Figure::kFig3b:
          return emit(name, "unseen initial state x0 = -10", {scenario(problem_, -10.0, none, false, "")});
        case Figure::kFig4:
        {
          std::vector<Run> runs = scenario(bounded, -4.0, none, true, "");
          say("collocation baseline");
          CollocationNlp nlp(bounded, Vec::Constant(1, -4.0));
          const CollocationResult col = solve_nlp(nlp, nlp.initial_guess());
          if (!col.converged())
            warn("collocation did not reach its tolerances (max defect " + std::to_string(col.max_defect) + ")");
          runs.push_back({"collocation", "collocation", to_closed_loop(col), true});
          return emit(name, "input bounds |u| <= 20.1, x0 = -4", {runs}, &bounded);
        }
        case Figure::kFig5:
        {
          const DisturbanceSchedule d = DisturbanceSchedule::paper();
          return emit(name, "state disturbances",
                      {scenario(bounded, -4.0, d, true, "x0=-4 "), scenario(problem_, 20.0, d, false, "x0=20 ")},
                      &bounded);
        }
        }
        return {};
      }

    private:
      const Dataset &data()
      {
        if (have_data_)
          return data_;
        fs::path path = opt_.dataset.empty() ? opt_.out_dir / "dataset.txt" : opt_.dataset;
        if (fs::exists(path))
        {
          data_ = load_dataset(path);
        }
        else
        {
          warn("dataset " + path.string() + " not found; generating the 101-point grid on [-5, 5]");
          data_ = generate_dataset(problem_, -5.0, 5.0, 101, SolverConfig{});
          fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
          save_dataset(data_, path);
        }
        have_data_ = true;
        return data_;
      }

      std::vector<Run> scenario(const OcpProblem &problem, double x0, const DisturbanceSchedule &d, bool constrained,
                                const std::string &prefix)
      {
        const Vec x = Vec::Constant(1, x0);
        std::vector<Run> runs;
        const std::string tag = prefix.empty() ? "" : (x0 < 0 ? "xm" : "xp") + std::to_string(static_cast<int>(std::abs(x0))) + "_";
        say(prefix + "CoNN closed loop");
        runs.push_back({prefix + "CoNN (w=1)", tag + "conn", simulate_closed_loop(problem, model(true), x, d, constrained)});
        runs.push_back({prefix + "CoNN (w=0)", tag + "conn_nocont",
                        simulate_closed_loop(problem, model(false), x, d, constrained), true});
        if (opt_.reference)
        {
          say(prefix + "reference loop");
          runs.push_back({prefix + "TPBVP per step", tag + "reference", reference_closed_loop(problem, x, d, constrained)});
        }
        return runs;
      }

      std::vector<fs::path> emit(const std::string &name, const std::string &title,
                                 const std::vector<std::vector<Run>> &groups, const OcpProblem *csv_problem = nullptr)
      {
        const OcpProblem &pr = csv_problem ? *csv_problem : problem_;
        fs::create_directories(opt_.out_dir);
        std::vector<fs::path> written;
        std::vector<PlotPanel> panels;
        for (const std::vector<Run> &group : groups)
        {
          PlotPanel xs{"state", "x", {}}, us{"input", "u", {}};
          for (const Run &run : group)
          {
            const fs::path csv = opt_.out_dir / (name + "_" + run.file + ".csv");
            write_result_csv(pr, run.result, csv);
            written.push_back(csv);
            xs.series.push_back({run.label, run.result.times, run.result.x_series.col(0), run.dashed});
            us.series.push_back({run.label, run.result.times.head(run.result.u_series.rows()),
                                 run.result.u_series.col(0), run.dashed});
          }
          if (groups.size() > 1)
          {
            const std::string prefix = group.front().label.substr(0, group.front().label.find("CoNN"));
            xs.title = prefix + xs.title;
            us.title = prefix + us.title;
          }
          panels.push_back(std::move(xs));
          panels.push_back(std::move(us));
        }
        const fs::path svg = opt_.out_dir / (name + ".svg");
        emit_plot(panels, svg, title);
        written.push_back(svg);
        return written;
      }

      void warn(const std::string &msg) const
      {
        if (opt_.warn)
          opt_.warn(msg);
      }
      void say(const std::string &msg) const
      {
        if (opt_.progress)
          opt_.progress(msg);
      }

      const ReproduceOptions &opt_;
      OcpProblem problem_;
      Dataset data_;
      bool have_data_ = false;
      std::optional<ConnModel> with_, without_;
    };

  } // namespace

  std::vector<std::filesystem::path> reproduce(Figure figure, const ReproduceOptions &options)
  {
    Reproducer r(options);
    return r.run(figure);
  }

} // namespace conn
