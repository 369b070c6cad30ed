// Command-line front end: run, baseline, compare, sweep, validate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "coalmpc/config.hpp"
#include "coalmpc/simulator.hpp"
#include "coalmpc/supervisor.hpp"
#include "coalmpc/trace_io.hpp"

using namespace coalmpc;

namespace {

struct Overrides {
  std::string config;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> clink;
  std::optional<int> tlambda;
  std::optional<double> mismatch;
  bool centralized = false;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? default_config() : load_config(o.config);
  if (!o.scenario.empty()) c.scenario = scenario_by_name(o.scenario);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.clink) c.controller.link_cost = *o.clink;
  if (o.tlambda) c.decision_interval = *o.tlambda;
  if (o.mismatch) {
    c.plant.area_factors =
        PlantConfig::mismatch(static_cast<int>(c.reaches.size()), *o.mismatch).area_factors;
  }
  c.validate();
  return c;
}

void save(const SimTrace& trace, const RunConfig& c, const std::string& label) {
  const std::filesystem::path dir = std::filesystem::path(c.output_dir) / label;
  std::filesystem::create_directories(dir);
  const std::string hash = config_hash(c);
  write_trace(trace, (dir / "trace.csv").string(), hash);
  write_controller_log(trace, (dir / "controller_log.csv").string());
  write_selection_log(trace, (dir / "selection_log.csv").string());
  emit_plot_data(trace, c.controller.link_cost, (dir / "plot").string());
  std::ofstream((dir / "config.json").string()) << dump_config(c) << "\n";
  std::cout << "wrote " << dir.string() << " (config " << hash << ")\n";
}

void print_report(const std::string& label, const CostReport& r) {
  std::printf("%-12s perf %12.3f  network %8.3f  combined %12.3f  links %6.2f  coalitions %6.2f  "
              "vars/step %6.2f  vars/coalition %6.2f\n",
              label.c_str(), r.performance, r.network, r.combined, r.links, r.coalitions,
              r.decision_vars_per_step, r.decision_vars_per_coalition);
}

int cmd_run(const Overrides& o, bool centralized) {
  const RunConfig c = resolve(o);
  const auto opts = c.simulation_options();
  const SimTrace t = centralized ? run_centralized(c.reaches, c.scenario, opts)
                                 : run_closed_loop(c.reaches, c.scenario, opts);
  const std::string label = (centralized ? "centralized_" : "coalitional_") + c.scenario.name;
  save(t, c, label);
  print_report(centralized ? "centralized" : "coalitional", accumulate_costs(t, c.controller.link_cost));
  return 0;
}

int cmd_compare(const Overrides& o) {
  const RunConfig c = resolve(o);
  const auto opts = c.simulation_options();
  const SimTrace coal = run_closed_loop(c.reaches, c.scenario, opts);
  const SimTrace cent = run_centralized(c.reaches, c.scenario, opts);
  save(coal, c, "coalitional_" + c.scenario.name);
  save(cent, c, "centralized_" + c.scenario.name);
  const double cl = c.controller.link_cost;
  const CostReport a = accumulate_costs(coal, cl);
  const CostReport b = accumulate_costs(cent, cl);
  std::printf("link cost %.3f\n", cl);
  print_report("coalitional", a);
  print_report("centralized", b);
  std::printf("c_l = 0     : coalitional %.3f  centralized %.3f\n", a.combined_unpriced,
              b.combined_unpriced);
  std::printf("c_l = %.3f : coalitional %.3f  centralized %.3f\n", cl, a.combined, b.combined);
  return 0;
}

int cmd_sweep(const Overrides& o) {
  RunConfig c = resolve(o);
  if (c.sweep.empty()) throw std::invalid_argument("sweep: list must be nonempty");
  double previous = 1e300;
  bool monotone = true;
  for (double cl : c.sweep) {
    RunConfig ci = c;
    ci.controller.link_cost = cl;
    const SimTrace t = run_closed_loop(ci.reaches, ci.scenario, ci.simulation_options());
    const CostReport r = accumulate_costs(t, cl);
    std::printf("c_l %8.3f  average links %7.3f  performance %12.3f  combined %12.3f\n", cl,
                r.links, r.performance, r.combined);
    if (r.links > previous) monotone = false;
    previous = r.links;
  }
  std::printf("average link count non-increasing in c_l: %s\n", monotone ? "yes" : "no");
  return 0;
}

int cmd_validate(const Overrides& o) {
  const RunConfig c = resolve(o);
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    if (!ok) ++failures;
  };
  const auto subs = build_canal(c.reaches, c.controller.sample_time);
  const int n = static_cast<int>(subs.size());
  const SynthesisWeights w{c.controller.level_weight, c.controller.input_weight};
  for (const Topology& t : {Topology::empty(n), Topology::full(n)}) {
    const GainSet g = synthesize(partition_of(t), subs, w);
    check(g.max_dare_residual() <= 1e-8, "DARE residual, topology " + t.bit_string());
    check(g.max_lyapunov_residual() <= 1e-8, "Lyapunov certificate, topology " + t.bit_string());
  }
  // Steady state is a fixed point of the model.
  const Vector p = c.scenario.offtakes_at(0);
  const CoalitionModel global = build_global_model(subs);
  const Vector x = steady_state(subs, p);
  const Vector x1 = plant_step(global, x, Vector::Zero(n), p);
  check((x1 - x).cwiseAbs().maxCoeff() <= 1e-9, "steady state is an equilibrium");
  const SteadyTarget target = compute_setpoint(global, p, Vector(0));
  check((target.state - x).cwiseAbs().maxCoeff() <= 1e-8, "setpoint equals telescoped flows");

  const auto opts = c.simulation_options();
  const SimTrace t = run_closed_loop(c.reaches, c.scenario, opts);
  double worst = 0;
  for (const auto& s : t.steps) worst = std::max(worst, s.inputs.cwiseAbs().maxCoeff());
  check(worst <= c.controller.max_flow_increment + 1e-9, "flow-increment bound over the run");
  check(static_cast<int>(t.size()) == c.scenario.horizon, "trace length equals horizon");
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coalitional MPC of an irrigation canal"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--scenario", o.scenario, "scenario preset: scenario1, scenario2, steady");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--clink", o.clink, "cost per active link");
    sub->add_option("--tlambda", o.tlambda, "supervisor decision interval [samples]");
    sub->add_option("--mismatch", o.mismatch, "alternating plant surface mismatch factor");
    sub->add_flag("--centralized", o.centralized, "run the centralized controller instead");
  };
  auto* run = app.add_subcommand("run", "simulate one scenario with the coalitional scheme");
  auto* baseline = app.add_subcommand("baseline", "simulate the centralized controller");
  auto* compare = app.add_subcommand("compare", "run both and report costs");
  auto* sweep = app.add_subcommand("sweep", "repeat the coalitional run over a link-cost grid");
  auto* validate = app.add_subcommand("validate", "check model and controller invariants");
  for (auto* s : {run, baseline, compare, sweep, validate}) add_common(s);
  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(o, o.centralized);
    if (*baseline) return cmd_run(o, true);
    if (*compare) return cmd_compare(o);
    if (*sweep) return cmd_sweep(o);
    if (*validate) return cmd_validate(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
