#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coalmpc/coalition_controller.hpp"
#include "coalmpc/supervisor.hpp"
#include "coalmpc/topology.hpp"

namespace coalmpc {

/// The first 13 reaches of the west main Dez canal.
std::vector<ReachParams> dez_reaches();

/// Piecewise-constant offtake change: from `step` on, reach `reach` (1-based)
/// withdraws `value` m^3/s.
struct OfftakeChange {
  int step = 0;
  int reach = 1;
  double value = 0;
};

struct Scenario {
  std::string name;
  int horizon = 288;
  Vector initial_offtakes;
  std::vector<OfftakeChange> schedule;
  double head_capacity = 157.0;  // [m^3/s]

  /// Offtakes in force at sample k.
  Vector offtakes_at(int k) const;
  /// Head inflow of the initial regime as a fraction of capacity.
  double initial_regime() const;
  void validate(int num_reaches) const;

  static Scenario scenario1();
  static Scenario scenario2();
  /// No offtake changes.
  static Scenario steady(int horizon = 288);
};

/// Plant parameters relative to the controller model.
struct PlantConfig {
  std::vector<double> area_factors;  // multipliers on A_s; empty = 1
  std::vector<int> delay_offsets;    // added to d_i; empty = 0
  double level_noise_std = 0.0;      // measurement noise on levels [m]

  /// Alternating ±f area mismatch: reach i gets 1 + f(-1)^(i+1).
  static PlantConfig mismatch(int num_reaches, double factor);
  std::vector<ReachParams> apply(const std::vector<ReachParams>& nominal) const;
};

/// Global ID model used as the simulated canal.
class Plant {
 public:
  Plant(const std::vector<ReachParams>& reaches, double sample_time);

  const std::vector<SubsystemModel>& subsystems() const { return subsystems_; }
  const std::vector<int>& offsets() const { return offsets_; }
  const Vector& state() const { return state_; }
  void set_state(const Vector& x) { state_ = x; }

  /// Steady state at the given offtakes.
  void settle(const Vector& offtakes);
  Vector levels() const;
  Vector gate_flows() const;  // q_i(k-1)
  /// Σ A_s e + T_c Σ (flow states): water stored relative to the reference.
  double storage() const;

  /// Advances one sample; inputs are applied as given.
  void step(const Vector& inputs, const Vector& offtakes);

 private:
  std::vector<SubsystemModel> subsystems_;
  std::vector<ReachParams> reaches_;
  std::vector<int> offsets_;
  CoalitionModel model_;
  double sample_time_;
  Vector state_;
};

/// Stateless form of Plant::step on a global model.
Vector plant_step(const CoalitionModel& global, const Vector& state, const Vector& inputs,
                  const Vector& offtakes);

/// What each coalition reported at one sample.
struct CoalitionRecord {
  std::vector<int> members;
  Vector setpoint_state;
  Vector setpoint_input;
  Vector setpoint_slack;
  Vector disturbance;
  std::string setpoint_status;
  std::string qp_status;
  int input_decision_vars = 0;
  int slack_decision_vars = 0;
  int qp_iterations = 0;
  bool fallback = false;
};

struct StepRecord {
  int step = 0;
  Vector levels;    // e_i(k)
  Vector flows;     // q_i(k) = q_i(k-1) + dq_i(k)
  Vector inputs;    // dq_i(k)
  Vector offtakes;  // p_i(k)
  std::string topology;
  double performance_cost = 0;  // Σ Q e^2 + R dq^2
  int links = 0;
  int coalitions = 0;
  int input_decision_vars = 0;
  int slack_decision_vars = 0;

  bool operator==(const StepRecord&) const = default;
};

struct SelectionEvent {
  int step = 0;
  std::string incumbent;
  std::string chosen;
  std::vector<CandidateValue> candidates;
};

struct SimTrace {
  int num_reaches = 0;
  std::vector<StepRecord> steps;
  // Not persisted in the trace file.
  std::vector<std::vector<CoalitionRecord>> coalitions;
  std::vector<SelectionEvent> selections;

  std::size_t size() const { return steps.size(); }
};

struct SimulationOptions {
  ControllerConfig controller;
  SupervisorConfig supervisor;
  PlantConfig plant;
  std::uint64_t seed = 1;
  bool use_cache = true;
  bool parallel = true;  // coalition steps
};

/// Coalitional scheme: supervisor every T_Λ samples, coalition controllers
/// every sample. Starts from the full topology.
SimTrace run_closed_loop(const std::vector<ReachParams>& reaches, const Scenario& scenario,
                         const SimulationOptions& options);

/// Single global coalition, fixed full topology, no supervisor.
SimTrace run_centralized(const std::vector<ReachParams>& reaches, const Scenario& scenario,
                         const SimulationOptions& options);

struct CostReport {
  double performance = 0;      // average per step
  double network = 0;          // average per step, c_l |Λ(k)|
  double combined = 0;
  double combined_unpriced = 0;  // c_l = 0
  double decision_vars_per_step = 0;
  double decision_vars_per_coalition = 0;
  double coalitions = 0;
  double links = 0;
};

CostReport accumulate_costs(const SimTrace& trace, double link_cost);

}  // namespace coalmpc
