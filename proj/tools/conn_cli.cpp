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

// Command-line front end: gen-data, train, simulate, baseline, compare, reproduce.

#include "conn/collocation.hpp"
#include "conn/control.hpp"
#include "conn/dataset.hpp"
#include "conn/errors.hpp"
#include "conn/model.hpp"
#include "conn/plot.hpp"
#include "conn/problems.hpp"
#include "conn/reproduce.hpp"
#include "conn/results_io.hpp"
#include "conn/training.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace conn;

namespace
{

  enum ExitCode
  {
    kOk = 0,
    kArgument = 2,
    kNonConvergence = 3,
    kIo = 4,
  };

  struct Common
  {
    std::string out_dir;
    std::string problem = "paper1d";

    fs::path output(const std::string &path) const
    {
      const fs::path p(path);
      if (p.is_absolute() || out_dir.empty())
        return p;
      return fs::path(out_dir) / p;
    }

    void ensure_parent(const fs::path &p) const
    {
      if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    }
  };

  Vec scalar_state(double v) { return Vec::Constant(1, v); }

  struct BoundsOptions
  {
    std::optional<double> u_min, u_max;

    OcpProblem apply(const OcpProblem &problem) const
    {
      if (!u_min && !u_max)
        return problem;
      if (problem.input_dim() != 1)
        throw ArgumentError("--u-min/--u-max apply to scalar inputs only");
      const Vec lo = u_min ? Vec::Constant(1, *u_min) : problem.u_min();
      const Vec hi = u_max ? Vec::Constant(1, *u_max) : problem.u_max();
      return problem.with_bounds(lo, hi);
    }

    /// Bounds for a --constrained run; at least one must end up finite.
    OcpProblem constrained(const OcpProblem &problem) const
    {
      const OcpProblem out = apply(problem);
      if ((out.u_min().array() == -INFINITY).all() && (out.u_max().array() == INFINITY).all())
        throw ArgumentError("--constrained needs finite input bounds, e.g. --u-min -20.1 --u-max 20.1");
      return out;
    }
  };

  void add_bounds(CLI::App *cmd, BoundsOptions &b)
  {
    cmd->add_option("--u-min", b.u_min, "Lower input bound");
    cmd->add_option("--u-max", b.u_max, "Upper input bound");
  }

  std::vector<PlotPanel> trajectory_panels(const std::vector<std::pair<std::string, const ClosedLoopResult *>> &runs)
  {
    PlotPanel xs{"state", "x", {}}, us{"input", "u", {}};
    bool dashed = false;
    for (const auto &[label, r] : runs)
    {
      xs.series.push_back({label, r->times, r->x_series.col(0), dashed});
      us.series.push_back({label, r->times.head(r->u_series.rows()), r->u_series.col(0), dashed});
      dashed = !dashed;
    }
    return {xs, us};
  }

  // ---------------------------------------------------------------- gen-data

  struct GenDataOptions
  {
    double x0_min = -5.0, x0_max = 5.0;
    int count = 101;
    std::optional<double> delta, t_final;
    std::string out = "dataset.txt";
  };

  int run_gen_data(const Common &common, const GenDataOptions &o)
  {
    OcpProblem problem = make_problem(common.problem);
    if (o.delta || o.t_final)
      problem = problem.with_grid(o.t_final.value_or(problem.t_final()), o.delta.value_or(problem.delta()));
    GenerationReport report;
    const Dataset ds = generate_dataset(problem, o.x0_min, o.x0_max, o.count, SolverConfig{}, &report);
    for (double x0 : report.failed_x0)
      std::cerr << "warning: boundary value problem for x0=" << x0 << " did not converge; entry skipped\n";
    const fs::path out = common.output(o.out);
    common.ensure_parent(out);
    save_dataset(ds, out);
    std::cout << "wrote " << out.string() << " (" << ds.count() << " trajectories, N=" << ds.steps << ")\n";
    return kOk;
  }

  // ------------------------------------------------------------------- train

  struct TrainOptions
  {
    std::string data;
    std::vector<int> hidden = ConnArchitecture{}.hidden;
    std::string activation_value = std::string(activation_name(ConnArchitecture{}.activation));
    int horizon = ConnArchitecture{}.horizon;
    double input_scale = ConnArchitecture{}.input_scale;
    TrainConfig config;
    std::string scheme = "rk4";
    std::string out = "conn.model";
    std::string loss_log;
  };

  int run_train(const Common &common, TrainOptions &o)
  {
    const Dataset ds = load_dataset(o.data);
    if (ds.entries.empty())
      throw ArgumentError("dataset " + o.data + " has no entries");
    const OcpProblem problem =
        make_problem(ds.problem_id).with_grid(ds.delta * static_cast<double>(ds.steps - 1), ds.delta);

    ConnArchitecture arch;
    arch.state_dim = ds.state_dim();
    arch.horizon = o.horizon;
    arch.hidden = o.hidden;
    arch.activation = parse_activation(o.activation_value);
    arch.input_scale = o.input_scale;
    if (o.scheme == "rk4")
      o.config.continuity_scheme = StepScheme::kRk4;
    else if (o.scheme == "euler")
      o.config.continuity_scheme = StepScheme::kEuler;
    else
      throw ArgumentError("--continuity-scheme must be rk4 or euler");
    o.config.validate();

    const ConnModel init = ConnModel::initialize(arch, o.config.seed);
    const TrainResult result = train(init, ds, problem, o.config, [](const EpochLog &e) {
      std::cerr << "epoch " << e.epoch + 1 << ": prediction " << e.prediction << ", continuity " << e.continuity
                << "\n";
    });
    if (result.diverged)
      std::cerr << "warning: training diverged; saving the last good checkpoint\n";

    const fs::path out = common.output(o.out);
    common.ensure_parent(out);
    save_model(result.model, out);
    if (!o.loss_log.empty())
    {
      const fs::path log = common.output(o.loss_log);
      common.ensure_parent(log);
      write_loss_log(result.log, o.config.continuity_weight, log);
    }
    std::cout << "wrote " << out.string() << " (" << result.updates << " updates)\n";
    return result.diverged ? kNonConvergence : kOk;
  }

  // ---------------------------------------------------------------- simulate

  struct SimulateOptions
  {
    std::string model;
    double x0 = 0.0;
    bool constrained = false;
    BoundsOptions bounds;
    std::string disturbance;
    std::string disturbance_mode = "jump";
    std::string out = "simulate.csv";
    bool reference = false;
    std::string plot;
  };

  DisturbanceSchedule make_schedule(const std::string &text, const std::string &mode)
  {
    const DisturbanceSchedule parsed = text == "paper" ? DisturbanceSchedule::paper() : DisturbanceSchedule::parse(text);
    if (mode == "jump")
      return parsed;
    if (mode == "offset")
      return DisturbanceSchedule(parsed.events(), DisturbanceMode::kInputOffset);
    throw ArgumentError("--disturbance-mode must be jump or offset");
  }

  fs::path sibling(const fs::path &path, const std::string &suffix)
  {
    return path.parent_path() / (path.stem().string() + suffix + path.extension().string());
  }

  int run_simulate(const Common &common, const SimulateOptions &o)
  {
    const OcpProblem base = make_problem(common.problem);
    const OcpProblem problem = o.constrained ? o.bounds.constrained(base) : o.bounds.apply(base);
    const ConnModel model = load_model(o.model);
    const DisturbanceSchedule schedule = make_schedule(o.disturbance, o.disturbance_mode);
    const ClosedLoopResult r = simulate_closed_loop(problem, model, scalar_state(o.x0), schedule, o.constrained);

    const fs::path out = common.output(o.out);
    common.ensure_parent(out);
    write_result_csv(problem, r, out);
    std::cout << "x(t_final) = " << r.x_series(r.steps() - 1, 0) << ", cost = " << r.running_cost << "\n";

    std::vector<std::pair<std::string, const ClosedLoopResult *>> runs{{"CoNN", &r}};
    std::optional<ClosedLoopResult> ref;
    if (o.reference)
    {
      ref = reference_closed_loop(problem, scalar_state(o.x0), schedule, o.constrained);
      write_result_csv(problem, *ref, sibling(out, "_reference"));
      runs.emplace_back("TPBVP per step", &*ref);
      std::cout << "reference x(t_final) = " << ref->x_series(ref->steps() - 1, 0) << "\n";
    }
    if (!o.plot.empty())
    {
      const fs::path svg = common.output(o.plot);
      common.ensure_parent(svg);
      emit_plot(trajectory_panels(runs), svg);
    }
    if (r.diverged)
    {
      std::cerr << "error: plant integration diverged; result truncated\n";
      return kNonConvergence;
    }
    return kOk;
  }

  // ---------------------------------------------------------------- baseline

  struct BaselineOptions
  {
    double x0 = 0.0;
    bool constrained = false;
    BoundsOptions bounds;
    std::string out = "baseline.csv";
    std::string plot;
  };

  int run_baseline(const Common &common, const BaselineOptions &o)
  {
    OcpProblem problem = make_problem(common.problem);
    problem = o.constrained ? o.bounds.constrained(problem) : problem.unbounded();
    CollocationNlp nlp(problem, scalar_state(o.x0));
    const CollocationResult col = solve_nlp(nlp, nlp.initial_guess());
    const ClosedLoopResult r = to_closed_loop(col);
    const fs::path out = common.output(o.out);
    common.ensure_parent(out);
    write_result_csv(problem, r, out);
    if (!o.plot.empty())
    {
      const fs::path svg = common.output(o.plot);
      common.ensure_parent(svg);
      emit_plot(trajectory_panels({{"collocation", &r}}), svg);
    }
    std::cout << "cost = " << col.cost << ", max defect = " << col.max_defect << "\n";
    if (!col.converged())
    {
      std::cerr << "error: collocation stopped at the iteration limit (projected gradient " << col.projected_gradient
                << ")\n";
      return kNonConvergence;
    }
    return kOk;
  }

  // ----------------------------------------------------------------- compare

  struct CompareOptions
  {
    std::string a, b;
    double t_from = 0.0;
  };

  int run_compare(const Common &common, const CompareOptions &o)
  {
    const OcpProblem problem = make_problem(common.problem);
    const ClosedLoopResult a = read_result_csv(problem, o.a);
    const ClosedLoopResult b = read_result_csv(problem, o.b);
    const TrajectoryComparison c = compare_trajectories(a, b, o.t_from);
    std::cout << "max_state_deviation: " << c.max_state_deviation << "\n"
              << "mean_state_deviation: " << c.mean_state_deviation << "\n"
              << "cost_gap: " << c.cost_gap << "\n";
    return kOk;
  }

  // --------------------------------------------------------------- reproduce

  struct ReproduceCliOptions
  {
    std::string figure = "all";
    std::string data, model, model_nocont;
    int epochs = TrainConfig{}.n_epoch;
    bool no_reference = false;
  };

  int run_reproduce(const Common &common, const ReproduceCliOptions &o, std::uint64_t seed)
  {
    if (common.problem != "paper1d")
      throw ArgumentError("reproduce runs the paper1d configuration only");
    ReproduceOptions opt;
    opt.out_dir = common.out_dir.empty() ? fs::path(".") : fs::path(common.out_dir);
    opt.dataset = o.data;
    opt.model = o.model;
    opt.model_nocont = o.model_nocont;
    opt.training.n_epoch = o.epochs;
    opt.training.seed = seed;
    opt.reference = !o.no_reference;
    opt.warn = [](const std::string &m) { std::cerr << "warning: " << m << "\n"; };
    opt.progress = [](const std::string &m) { std::cerr << m << "\n"; };

    std::vector<Figure> figures;
    if (o.figure == "all")
      figures = {Figure::kFig3a, Figure::kFig3b, Figure::kFig4, Figure::kFig5};
    else
      figures = {parse_figure(o.figure)};
    for (Figure f : figures)
    {
      std::cerr << "== " << figure_name(f) << "\n";
      for (const fs::path &p : reproduce(f, opt))
        std::cout << "wrote " << p.string() << "\n";
    }
    return kOk;
  }

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Co-state neural network toolkit for Pontryagin-based optimal control"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with option values (sections per subcommand)");

  Common common;
  if (const char *env = std::getenv("CONN_OUT_DIR"))
    common.out_dir = env;
  std::uint64_t seed = 0;
  app.add_option("--out-dir", common.out_dir, "Directory for relative output paths (default: $CONN_OUT_DIR or .)");
  app.add_option("--problem", common.problem, "Registered problem id")->check(CLI::IsMember(registered_problems()));
  app.add_option("--seed", seed, "Seed for model initialisation");

  GenDataOptions gen;
  auto *cmd_gen = app.add_subcommand("gen-data", "Solve boundary value problems on a grid of initial states");
  cmd_gen->add_option("--x0-min", gen.x0_min, "Smallest initial state")->capture_default_str();
  cmd_gen->add_option("--x0-max", gen.x0_max, "Largest initial state")->capture_default_str();
  cmd_gen->add_option("--count", gen.count, "Number of initial states M")->capture_default_str();
  cmd_gen->add_option("--delta", gen.delta, "Time step");
  cmd_gen->add_option("--t-final", gen.t_final, "Final time");
  cmd_gen->add_option("--out", gen.out, "Dataset file")->capture_default_str();

  TrainOptions tr;
  auto *cmd_train = app.add_subcommand("train", "Train a co-state network on a dataset");
  cmd_train->add_option("--data", tr.data, "Dataset file")->required();
  cmd_train->add_option("--hidden", tr.hidden, "Hidden layer widths, comma separated")->delimiter(',')->capture_default_str();
  cmd_train->add_option("--activation", tr.activation_value, "tanh, relu or softplus")->capture_default_str();
  cmd_train->add_option("--horizon", tr.horizon, "Prediction horizon n")->capture_default_str();
  cmd_train->add_option("--input-scale", tr.input_scale, "Input scaling factor")->capture_default_str();
  cmd_train->add_option("--epochs", tr.config.n_epoch, "Training epochs")->capture_default_str();
  cmd_train->add_option("--lr", tr.config.learning_rate, "Adam learning rate")->capture_default_str();
  cmd_train->add_option("--lr-decay", tr.config.lr_decay, "Learning-rate factor per epoch")->capture_default_str();
  cmd_train->add_option("--continuity-weight", tr.config.continuity_weight, "Weight of the continuity loss")
      ->capture_default_str();
  cmd_train->add_option("--continuity-scheme", tr.scheme, "rk4 or euler")->capture_default_str();
  cmd_train->add_flag("--shuffle", tr.config.shuffle, "Shuffle windows every epoch");
  cmd_train->add_option("--out", tr.out, "Model file")->capture_default_str();
  cmd_train->add_option("--loss-log", tr.loss_log, "Per-epoch loss CSV");

  SimulateOptions sim;
  auto *cmd_sim = app.add_subcommand("simulate", "Closed-loop simulation with a trained model");
  cmd_sim->add_option("--model", sim.model, "Model file")->required();
  cmd_sim->add_option("--x0", sim.x0, "Initial state")->required();
  cmd_sim->add_flag("--constrained", sim.constrained, "Solve the input QP instead of the unconstrained law");
  add_bounds(cmd_sim, sim.bounds);
  cmd_sim->add_option("--disturbance", sim.disturbance, "Events t:mag,... or 'paper'");
  cmd_sim->add_option("--disturbance-mode", sim.disturbance_mode, "jump (state jump) or offset (input offset)")
      ->capture_default_str();
  cmd_sim->add_option("--out", sim.out, "Result CSV")->capture_default_str();
  cmd_sim->add_flag("--reference", sim.reference, "Also run the per-step boundary value solver loop");
  cmd_sim->add_option("--plot", sim.plot, "SVG plot");

  BaselineOptions base;
  auto *cmd_base = app.add_subcommand("baseline", "Open-loop trapezoidal collocation");
  cmd_base->add_option("--x0", base.x0, "Initial state")->required();
  cmd_base->add_flag("--constrained", base.constrained, "Impose the input bounds");
  add_bounds(cmd_base, base.bounds);
  cmd_base->add_option("--out", base.out, "Result CSV")->capture_default_str();
  cmd_base->add_option("--plot", base.plot, "SVG plot");

  CompareOptions cmp;
  auto *cmd_cmp = app.add_subcommand("compare", "Deviation metrics between two result CSV files");
  cmd_cmp->add_option("a", cmp.a, "First result CSV")->required();
  cmd_cmp->add_option("b", cmp.b, "Second result CSV")->required();
  cmd_cmp->add_option("--t-from", cmp.t_from, "Ignore samples before this time")->capture_default_str();

  ReproduceCliOptions rep;
  auto *cmd_rep = app.add_subcommand("reproduce", "Regenerate figure data and plots");
  cmd_rep->add_option("--figure", rep.figure, "fig3a, fig3b, fig4, fig5 or all")
      ->check(CLI::IsMember({"fig3a", "fig3b", "fig4", "fig5", "all"}))
      ->capture_default_str();
  cmd_rep->add_option("--data", rep.data, "Dataset file (built when missing)");
  cmd_rep->add_option("--model", rep.model, "Model trained with continuity weight 1 (trained when missing)");
  cmd_rep->add_option("--model-nocont", rep.model_nocont, "Model trained with continuity weight 0 (trained when missing)");
  cmd_rep->add_option("--epochs", rep.epochs, "Epochs for auto-trained models")->capture_default_str();
  cmd_rep->add_flag("--no-reference", rep.no_reference, "Skip the per-step boundary value solver loop");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &e)
  {
    const int code = app.exit(e);
    return code == 0 ? kOk : kArgument;
  }

  try
  {
    if (*cmd_gen)
      return run_gen_data(common, gen);
    if (*cmd_train)
    {
      tr.config.seed = seed;
      return run_train(common, tr);
    }
    if (*cmd_sim)
      return run_simulate(common, sim);
    if (*cmd_base)
      return run_baseline(common, base);
    if (*cmd_cmp)
      return run_compare(common, cmp);
    if (*cmd_rep)
      return run_reproduce(common, rep, seed);
  }
  catch (const ArgumentError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kArgument;
  }
  catch (const ConvergenceError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  }
  catch (const DivergenceError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kNonConvergence;
  }
  catch (const ParseError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  catch (const IoError &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  catch (const fs::filesystem_error &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
