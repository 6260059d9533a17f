// phasehit: joint hitting-time distributions of finite-state Markov chains.
//
//   phasehit inspect  model.ph
//   phasehit density  model.ph --t "1=0.3,2=0.3,3=0.9"
//   phasehit density  model.ph --region "{2,3}<{1}" --grid "0:0.6:12,0:1.2:12"
//   phasehit tail     model.ph --event "tau(1)>0.5 && tau(2)==tau(3)"
//   phasehit simulate model.ph --report regions -n 1000000 --seed 7
//   phasehit verify   model.ph --suite cross-oracles
//
// Tables are CSV on stdout; --json emits the same rows as a JSON array.
// PHASEHIT_THREADS caps the worker pool.

#include <CLI11.hpp>

#include "phasehit/commands.hpp"
#include "phasehit/model_io.hpp"

#include <iostream>

using namespace phasehit;

int main(int argc, char** argv) {
  CLI::App app{"joint hitting-time distributions of finite-state Markov chains"};
  app.require_subcommand(1);

  std::string model_path;
  bool json = false;
  double tol = 1e-9;
  app.add_flag("--json", json, "emit JSON instead of CSV");
  app.add_option("--tol", tol, "quadrature tolerance for tail evaluations");

  auto* inspect = app.add_subcommand("inspect", "print the expanded model");
  inspect->add_option("model", model_path, "model file")->required();

  auto* density = app.add_subcommand("density", "joint hitting-time density");
  std::string t_spec, region_spec, grid_spec;
  bool absorbing_form = false;
  density->add_option("model", model_path, "model file")->required();
  density->add_option("--t", t_spec, "hitting-time coordinates, e.g. \"1=0.3,2=0.9\"");
  density->add_option("--region", region_spec, "region, e.g. \"{2,3}<{1}\"");
  density->add_option("--grid", grid_spec, "per-block axes lo:hi:cells, comma separated");
  density->add_flag("--absorbing-form", absorbing_form,
                    "evaluate with full-generator exponentials (absorbing targets)");

  auto* tail = app.add_subcommand("tail", "tail/equality probabilities");
  std::string event_expr;
  std::int64_t tail_sim = 0;
  std::uint64_t seed = 1;
  double horizon = 0.0;
  tail->add_option("model", model_path, "model file")->required();
  tail->add_option("--event", event_expr,
                   "constraints: tau(k)>c and tau(j)==tau(k), joined by &&")
      ->required();
  tail->add_option("--sim", tail_sim, "add simulated rows with this many paths");
  tail->add_option("--seed", seed, "simulation seed");
  tail->add_option("--horizon", horizon, "simulation cutoff time");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates");
  std::string report = "regions";
  std::int64_t paths = 100000;
  simulate->add_option("model", model_path, "model file")->required();
  simulate->add_option("--report", report, "regions | tails | histogram");
  simulate->add_option("-n,--paths", paths, "number of paths");
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--horizon", horizon, "cutoff time (default 20/min-rate)");
  simulate->add_option("--event", event_expr, "tail constraints (tails report)");
  simulate->add_option("--region", region_spec, "region (histogram report)");
  simulate->add_option("--grid", grid_spec, "axes (histogram report)");

  auto* verify = app.add_subcommand("verify", "internal consistency checks");
  std::string suite = "special-cases";
  std::int64_t budget = 100000;
  verify->add_option("model", model_path, "model file")->required();
  verify->add_option("--suite", suite, "special-cases | cross-oracles | simulation");
  verify->add_option("--budget", budget, "simulation paths for the simulation suite");
  verify->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const IntensityModel model = load_model(model_path);
    ResultTable table;

    if (inspect->parsed()) {
      std::cout << serialize_model(model);
      return 0;
    }
    if (density->parsed()) {
      DensityCommand cmd;
      if (!t_spec.empty()) cmd.t = parse_time_spec(t_spec);
      if (!region_spec.empty()) cmd.region = parse_region(region_spec);
      if (!grid_spec.empty()) cmd.grid = parse_grid(grid_spec);
      cmd.absorbing_form = absorbing_form;
      table = cmd_density(model, cmd);
    } else if (tail->parsed()) {
      TailCommand cmd;
      cmd.expression = event_expr;
      cmd.tol = tol;
      cmd.sim_paths = tail_sim;
      cmd.seed = seed;
      cmd.horizon = horizon;
      table = cmd_tail(model, cmd);
    } else if (simulate->parsed()) {
      SimulateCommand cmd;
      if (report == "regions")
        cmd.report = SimulateReport::regions;
      else if (report == "tails")
        cmd.report = SimulateReport::tails;
      else if (report == "histogram")
        cmd.report = SimulateReport::histogram;
      else
        throw ValueError("unknown report '" + report + "'");
      cmd.paths = paths;
      cmd.seed = seed;
      cmd.horizon = horizon;
      cmd.event = event_expr;
      if (!region_spec.empty()) cmd.region = parse_region(region_spec);
      if (!grid_spec.empty()) cmd.grid = parse_grid(grid_spec);
      table = cmd_simulate(model, cmd);
    } else if (verify->parsed()) {
      VerifyCommand cmd;
      if (suite == "special-cases")
        cmd.suite = VerifySuite::special_cases;
      else if (suite == "cross-oracles")
        cmd.suite = VerifySuite::cross_oracles;
      else if (suite == "simulation")
        cmd.suite = VerifySuite::simulation;
      else
        throw ValueError("unknown suite '" + suite + "'");
      cmd.budget = budget;
      cmd.seed = seed;
      cmd.tol = tol;
      table = cmd_verify(model, cmd);
      std::cout << (json ? table.json() : table.csv());
      return verify_passed(table) ? 0 : 1;
    }

    std::cout << (json ? table.json() : table.csv());
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
