#pragma once

#include <memory>

#include "coalmpc/canal_model.hpp"
#include "coalmpc/kalman.hpp"
#include "coalmpc/qp.hpp"

namespace coalmpc {

struct ControllerConfig {
  int prediction_horizon = 10;
  int control_horizon = 3;
  double level_weight = 250.0;      // Q on level errors
  double input_weight = 2800.0;     // R on flow increments
  double slack_weight = 1e4;        // S on flow-floor slacks
  double setpoint_slack_weight = 1e3;  // G on the steady-state residual
  double link_cost = 0.6;
  double sample_time = 300.0;       // [s]
  double max_flow_increment = 1.0;  // |dq| bound [m^3/s]
  double flow_floor = 0.01;         // q >= floor [m^3/s]
  int history_length = 20;
  KalmanSettings kalman;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Zero-level-error steady state (ξ̄, ῡ) and the right-hand side it solves.
struct SteadyTarget {
  Vector state;
  Vector input;
  Vector rhs;  // Φρ + Ψω̂
};

/// Nearest feasible steady state (ξˢ, υˢ) with the residual slack σ.
struct Setpoint {
  Vector state;
  Vector input;
  Vector slack;
  bool feasible = false;
  QpStatus status = QpStatus::kInfeasible;
};

/// Solves [I-Ξ, -Υ; Γ, 0] [ξ̄; ῡ] = [Φρ + Ψω̂; 0].
SteadyTarget compute_setpoint(const CoalitionModel& model, const Vector& offtakes,
                              const Vector& disturbance);

/// Projects the target onto the flow floor and the input box at the current
/// state; the steady-state equation is relaxed by σ.
Setpoint feasible_setpoint(const CoalitionModel& model, const SteadyTarget& target,
                           const Vector& current_state, const Matrix& gain,
                           const ControllerConfig& config);

/// Condensed auxiliary MPC problem data for one coalition and gain pair.
/// Decision vector: [υ'(0..Nc-1); ε(1..Np)], with ε one slack per flow
/// state per step.
struct MpcFormulation {
  int state_dim = 0;
  int input_dim = 0;
  int num_flows = 0;
  int prediction_horizon = 0;
  int control_horizon = 0;
  double max_input = 1.0;
  double flow_floor = 0.0;
  Matrix gain;
  Matrix hessian;
  Matrix linear_map;   // f = linear_map * ζ0
  Matrix ineq_matrix;  // constant
  // b_in = ineq_offset + ineq_state_map * ζ0 + ineq_input_map * υˢ + ineq_setpoint_map * ξˢ
  Vector ineq_offset;
  Matrix ineq_state_map;
  Matrix ineq_input_map;
  Matrix ineq_setpoint_map;
  Matrix closed_loop;  // Ξ + ΥK
  Matrix upsilon;
  Matrix flow_selector;
  /// Shared by every solve; H and the constraint rows never change.
  std::shared_ptr<const QpFactorization> factorization;

  int input_decision_vars() const { return input_dim * control_horizon; }
  int slack_decision_vars() const { return num_flows * prediction_horizon; }
};

MpcFormulation build_mpc(const CoalitionModel& model, const Matrix& gain, const Matrix& terminal,
                         const ControllerConfig& config);

struct MpcResult {
  Vector moves;   // υ'(0..Nc-1), stacked
  Vector slacks;  // ε(1..Np), stacked
  QpStatus status = QpStatus::kInfeasible;
  int input_decision_vars = 0;
  int slack_decision_vars = 0;
  int iterations = 0;
};

MpcResult mpc_step(const MpcFormulation& form, const Vector& shifted_state,
                   const Setpoint& setpoint);

MpcResult mpc_step(const CoalitionModel& model, const Vector& shifted_state,
                   const Setpoint& setpoint, const Matrix& gain, const Matrix& terminal,
                   const ControllerConfig& config);

/// υ = Kζ + υˢ + υ'(0).
Vector control_action(const Vector& shifted_state, const Vector& setpoint_input,
                      const Vector& moves, const Matrix& gain);

/// Everything a coalition logs about one sample.
struct ControllerOutput {
  Vector inputs;  // member order
  SteadyTarget target;
  Setpoint setpoint;
  Vector state_estimate;
  Vector disturbance_estimate;
  MpcResult mpc;
  bool fallback = false;  // MPC infeasible: saturated LQ law applied
};

/// Bottom-layer agent group: filter, setpoint and auxiliary MPC.
/// Not reentrant; one instance per coalition.
class CoalitionController {
 public:
  CoalitionController(CoalitionModel model, Matrix gain, Matrix terminal,
                      const ControllerConfig& config);

  /// Initializes the filter from past data before the first step.
  void warm_start(const HistoryBuffer& history, const Measurement& latest);

  /// One sample: filter correction, setpoint, MPC, control action.
  ControllerOutput step(const Measurement& y, const Vector& global_offtakes);

  const CoalitionModel& model() const { return model_; }
  const Matrix& gain() const { return gain_; }
  const Matrix& terminal() const { return terminal_; }
  const KalmanState& filter() const { return filter_; }
  bool has_setpoint() const { return has_setpoint_; }
  const Setpoint& last_setpoint() const { return last_setpoint_; }

 private:
  CoalitionModel model_;
  Matrix gain_;
  Matrix terminal_;
  ControllerConfig config_;
  MpcFormulation mpc_;
  KalmanState filter_;
  bool started_ = false;
  bool has_pending_ = false;
  Vector pending_inputs_;
  Vector pending_offtakes_;
  bool has_setpoint_ = false;
  Setpoint last_setpoint_;
};

}  // namespace coalmpc
