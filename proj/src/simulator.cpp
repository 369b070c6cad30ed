#include "coalmpc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>

namespace coalmpc {

std::vector<ReachParams> dez_reaches() {
  struct Row {
    double length, width, surface;
    int delay;
  };
  static const Row rows[] = {
      {6219, 12, 0.9318, 3}, {1933, 12, 1.0952, 1}, {3718, 10, 0.8554, 2}, {3906, 10, 3.7060, 2},
      {2934, 5, 1.7095, 2},  {4670, 5, 0.7786, 3},  {3110, 5, 0.6661, 2},  {2240, 5, 0.8904, 1},
      {3405, 5, 0.8671, 2},  {3820, 5, 0.4897, 2},  {2520, 4, 0.4032, 2},  {2874, 4, 0.3820, 2},
      {2468, 5, 0.3884, 2},
  };
  std::vector<ReachParams> out;
  int i = 1;
  for (const Row& r : rows) {
    out.push_back({i++, r.surface * 1e5, r.delay, r.length, r.width});
  }
  return out;
}

Vector Scenario::offtakes_at(int k) const {
  Vector p = initial_offtakes;
  for (const auto& c : schedule) {
    if (c.step <= k) p(c.reach - 1) = c.value;
  }
  return p;
}

double Scenario::initial_regime() const { return initial_offtakes.sum() / head_capacity; }

void Scenario::validate(int num_reaches) const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("scenario." + what);
  };
  if (horizon < 1) fail("horizon: must be >= 1");
  if (initial_offtakes.size() != num_reaches) {
    fail("initial_offtakes: expected " + std::to_string(num_reaches) + " entries");
  }
  if ((initial_offtakes.array() < 0).any()) fail("initial_offtakes: values must be >= 0");
  if (!(head_capacity > 0)) fail("head_capacity: must be > 0");
  if (initial_offtakes.sum() > head_capacity) fail("initial_offtakes: exceed head_capacity");
  std::vector<int> last(static_cast<std::size_t>(num_reaches), -1);
  for (const auto& c : schedule) {
    if (c.reach < 1 || c.reach > num_reaches) fail("schedule.reach: no such reach");
    if (c.value < 0) fail("schedule.value: must be >= 0");
    if (c.step < 0) fail("schedule.step: must be >= 0");
    int& prev = last[static_cast<std::size_t>(c.reach - 1)];
    if (c.step <= prev) fail("schedule.step: must be strictly increasing per reach");
    prev = c.step;
  }
}

Scenario Scenario::scenario1() {
  Scenario s;
  s.name = "scenario1";
  s.horizon = 288;
  s.initial_offtakes = Vector::Constant(13, 2.0);
  s.initial_offtakes(3) = 12.5;
  s.initial_offtakes(8) = 10.0;
  s.initial_offtakes(9) = 6.25;
  s.initial_offtakes(12) = 10.0;
  s.schedule = {{72, 4, 2.5}, {72, 9, 5.0}, {72, 10, 1.25}, {72, 13, 0.0}};
  return s;
}

Scenario Scenario::scenario2() {
  Scenario s = scenario1();
  s.name = "scenario2";
  s.schedule.insert(s.schedule.end(), {{144, 4, 12.5}, {144, 9, 10.0}, {144, 10, 6.25}, {144, 13, 10.0}});
  return s;
}

Scenario Scenario::steady(int horizon) {
  Scenario s = scenario1();
  s.name = "steady";
  s.horizon = horizon;
  s.schedule.clear();
  return s;
}

PlantConfig PlantConfig::mismatch(int num_reaches, double factor) {
  PlantConfig p;
  for (int i = 1; i <= num_reaches; ++i) p.area_factors.push_back(i % 2 ? 1.0 + factor : 1.0 - factor);
  return p;
}

std::vector<ReachParams> PlantConfig::apply(const std::vector<ReachParams>& nominal) const {
  if (!area_factors.empty() && area_factors.size() != nominal.size()) {
    throw std::invalid_argument("plant.area_factors: expected one entry per reach");
  }
  if (!delay_offsets.empty() && delay_offsets.size() != nominal.size()) {
    throw std::invalid_argument("plant.delay_offsets: expected one entry per reach");
  }
  std::vector<ReachParams> out = nominal;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!area_factors.empty()) out[i].backwater_surface *= area_factors[i];
    if (!delay_offsets.empty()) out[i].delay_steps += delay_offsets[i];
    if (!(out[i].backwater_surface > 0)) {
      throw std::invalid_argument("plant.area_factors: perturbed surface must stay positive");
    }
    if (out[i].delay_steps < 1) {
      throw std::invalid_argument("plant.delay_offsets: perturbed delay must stay >= 1");
    }
  }
  return out;
}

Plant::Plant(const std::vector<ReachParams>& reaches, double sample_time)
    : subsystems_(build_canal(reaches, sample_time)),
      reaches_(reaches),
      offsets_(global_state_offsets(subsystems_)),
      model_(build_global_model(subsystems_)),
      sample_time_(sample_time),
      state_(Vector::Zero(offsets_.back())) {}

void Plant::settle(const Vector& offtakes) { state_ = steady_state(subsystems_, offtakes); }

Vector Plant::levels() const { return model_.gamma * state_; }

Vector Plant::gate_flows() const { return model_.gate_flow_selector * state_; }

double Plant::storage() const {
  const Vector e = levels();
  double w = 0;
  for (std::size_t i = 0; i < reaches_.size(); ++i) {
    w += reaches_[i].backwater_surface * e(static_cast<Eigen::Index>(i));
  }
  return w + sample_time_ * (model_.flow_selector * state_).sum();
}

Vector plant_step(const CoalitionModel& global, const Vector& state, const Vector& inputs,
                  const Vector& offtakes) {
  return global.xi * state + global.upsilon * inputs + global.phi * offtakes;
}

void Plant::step(const Vector& inputs, const Vector& offtakes) {
  state_ = plant_step(model_, state_, inputs, offtakes);
}

namespace {

std::string key_of(const std::vector<int>& members) {
  std::string k;
  for (int m : members) k += std::to_string(m) + ",";
  return k;
}

// Rebuilds the controller-layout global state from measurements: flow
// states of reach i are its last d_i measured gate flows.
class StateReconstructor {
 public:
  StateReconstructor(const std::vector<SubsystemModel>& subsystems, const Vector& initial_flows)
      : subsystems_(subsystems), offsets_(global_state_offsets(subsystems)) {
    int max_delay = 1;
    for (const auto& s : subsystems) max_delay = std::max(max_delay, s.delay);
    for (int j = 0; j < max_delay; ++j) flows_.push_back(initial_flows);
  }

  void push(const Vector& gate_flows) {
    flows_.push_front(gate_flows);
    flows_.pop_back();
  }

  Vector state(const Vector& levels) const {
    Vector x(offsets_.back());
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      const int d = subsystems_[i].delay;
      for (int j = 0; j < d; ++j) x(offsets_[i] + j) = flows_[static_cast<std::size_t>(j)](static_cast<Eigen::Index>(i));
      x(offsets_[i] + d) = levels(static_cast<Eigen::Index>(i));
    }
    return x;
  }

 private:
  const std::vector<SubsystemModel>& subsystems_;
  std::vector<int> offsets_;
  std::deque<Vector> flows_;  // newest first
};

SimTrace run(const std::vector<ReachParams>& reaches, const Scenario& scenario,
             const SimulationOptions& options, bool coalitional) {
  const ControllerConfig& cc = options.controller;
  cc.validate();
  const int n_reach = static_cast<int>(reaches.size());
  scenario.validate(n_reach);
  if (coalitional && options.supervisor.decision_interval < 1) {
    throw std::invalid_argument("supervisor.decision_interval: must be >= 1");
  }

  const auto nominal = build_canal(reaches, cc.sample_time);
  const auto offsets = global_state_offsets(nominal);
  Plant plant(options.plant.apply(reaches), cc.sample_time);
  plant.settle(scenario.offtakes_at(0));

  SynthesisCache cache(nominal, {cc.level_weight, cc.input_weight}, options.use_cache);
  SupervisorConfig sup = options.supervisor;
  sup.link_cost = cc.link_cost;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  Topology topology = Topology::full(n_reach);
  std::shared_ptr<const GainSet> gains = cache.get(partition_of(topology));
  std::vector<std::unique_ptr<CoalitionController>> controllers;
  auto build_controllers = [&](std::map<std::string, std::unique_ptr<CoalitionController>> keep,
                               const HistoryBuffer& history, const Measurement& y) {
    controllers.clear();
    for (const auto& g : gains->coalitions) {
      auto it = keep.find(key_of(g.model.members));
      if (it != keep.end()) {
        controllers.push_back(std::move(it->second));
        continue;
      }
      auto c = std::make_unique<CoalitionController>(g.model, g.k, g.p, cc);
      c->warm_start(history, y);
      controllers.push_back(std::move(c));
    }
  };

  HistoryBuffer history(static_cast<std::size_t>(cc.history_length));
  StateReconstructor recon(nominal, plant.gate_flows());
  PublishedSetpoints published = PublishedSetpoints::bootstrap(nominal, plant.gate_flows());

  SimTrace trace;
  trace.num_reaches = n_reach;
  for (int k = 0; k < scenario.horizon; ++k) {
    try {
      const Vector offtakes = scenario.offtakes_at(k);
      Measurement y{plant.levels(), plant.gate_flows()};
      if (options.plant.level_noise_std > 0) {
        for (Eigen::Index i = 0; i < y.levels.size(); ++i) {
          y.levels(i) += options.plant.level_noise_std * noise(rng);
        }
      }
      if (k > 0) recon.push(y.gate_flows);

      if (k == 0) {
        build_controllers({}, history, y);
      } else if (coalitional && k % sup.decision_interval == 0) {
        Selection sel = select_topology(recon.state(y.levels), topology, cache, offtakes,
                                        published, sup);
        trace.selections.push_back({k, topology.bit_string(), sel.topology.bit_string(),
                                    sel.candidates});
        if (!(sel.topology == topology)) {
          std::map<std::string, std::unique_ptr<CoalitionController>> keep;
          for (auto& c : controllers) keep.emplace(key_of(c->model().members), std::move(c));
          topology = sel.topology;
          gains = sel.gains;
          build_controllers(std::move(keep), history, y);
        }
      }

      const auto n_coal = static_cast<long>(controllers.size());
      std::vector<ControllerOutput> outs(controllers.size());
      std::vector<std::exception_ptr> errors(controllers.size());
#pragma omp parallel for schedule(dynamic) if (options.parallel)
      for (long c = 0; c < n_coal; ++c) {
        const auto idx = static_cast<std::size_t>(c);
        try {
          outs[idx] = controllers[idx]->step(y, offtakes);
        } catch (...) {
          errors[idx] = std::current_exception();
        }
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }

      StepRecord rec;
      rec.step = k;
      rec.inputs = Vector::Zero(n_reach);
      std::vector<CoalitionRecord> crec;
      for (std::size_t c = 0; c < controllers.size(); ++c) {
        const CoalitionModel& m = controllers[c]->model();
        const ControllerOutput& o = outs[c];
        for (int li = 0; li < m.size(); ++li) {
          rec.inputs(m.members[static_cast<std::size_t>(li)]) = o.inputs(li);
          published.input(m.members[static_cast<std::size_t>(li)]) = o.setpoint.input(li);
        }
        scatter_state(m, offsets, o.setpoint.state, published.state);
        rec.input_decision_vars += o.mpc.input_decision_vars;
        rec.slack_decision_vars += o.mpc.slack_decision_vars;
        crec.push_back({m.members, o.setpoint.state, o.setpoint.input, o.setpoint.slack,
                        o.disturbance_estimate, std::string(to_string(o.setpoint.status)),
                        std::string(to_string(o.mpc.status)), o.mpc.input_decision_vars,
                        o.mpc.slack_decision_vars, o.mpc.iterations, o.fallback});
      }
      rec.levels = plant.levels();
      rec.flows = plant.gate_flows() + rec.inputs;
      rec.offtakes = offtakes;
      rec.topology = topology.bit_string();
      rec.links = topology.link_count();
      rec.coalitions = static_cast<int>(controllers.size());
      rec.performance_cost =
          cc.level_weight * rec.levels.squaredNorm() + cc.input_weight * rec.inputs.squaredNorm();

      if (rec.inputs.cwiseAbs().maxCoeff() > cc.max_flow_increment + 1e-9) {
        throw std::logic_error("input outside the flow-increment bound");
      }
      history.push({y, rec.inputs, offtakes});
      plant.step(rec.inputs, offtakes);
      trace.steps.push_back(std::move(rec));
      trace.coalitions.push_back(std::move(crec));
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(k) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace

SimTrace run_closed_loop(const std::vector<ReachParams>& reaches, const Scenario& scenario,
                         const SimulationOptions& options) {
  return run(reaches, scenario, options, true);
}

SimTrace run_centralized(const std::vector<ReachParams>& reaches, const Scenario& scenario,
                         const SimulationOptions& options) {
  return run(reaches, scenario, options, false);
}

CostReport accumulate_costs(const SimTrace& trace, double link_cost) {
  CostReport r;
  if (trace.steps.empty()) return r;
  double per_coalition = 0;
  for (const auto& s : trace.steps) {
    r.performance += s.performance_cost;
    r.links += s.links;
    r.coalitions += s.coalitions;
    r.decision_vars_per_step += s.input_decision_vars;
    per_coalition += s.coalitions > 0 ? static_cast<double>(s.input_decision_vars) / s.coalitions : 0.0;
  }
  const double n = static_cast<double>(trace.steps.size());
  r.performance /= n;
  r.links /= n;
  r.coalitions /= n;
  r.decision_vars_per_step /= n;
  r.decision_vars_per_coalition = per_coalition / n;
  r.network = link_cost * r.links;
  r.combined = r.performance + r.network;
  r.combined_unpriced = r.performance;
  return r;
}

}  // namespace coalmpc
