#include "coalmpc/coalition_controller.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace coalmpc {

void ControllerConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("controller." + field + ": " + why);
  };
  if (prediction_horizon < 1) fail("prediction_horizon", "must be >= 1");
  if (control_horizon < 1) fail("control_horizon", "must be >= 1");
  if (control_horizon > prediction_horizon) fail("control_horizon", "must not exceed prediction_horizon");
  if (level_weight < 0) fail("level_weight", "must be >= 0");
  if (!(input_weight > 0)) fail("input_weight", "must be > 0");
  if (!(slack_weight > 0)) fail("slack_weight", "must be > 0");
  if (!(setpoint_slack_weight > 0)) fail("setpoint_slack_weight", "must be > 0");
  if (link_cost < 0) fail("link_cost", "must be >= 0");
  if (!(sample_time > 0)) fail("sample_time", "must be > 0");
  if (!(max_flow_increment > 0)) fail("max_flow_increment", "must be > 0");
  if (flow_floor < 0) fail("flow_floor", "must be >= 0");
  if (history_length < 0) fail("history_length", "must be >= 0");
  if (!(kalman.measurement_noise > 0)) fail("kalman.measurement_noise", "must be > 0");
}

namespace {

std::string coalition_name(const CoalitionModel& model) {
  std::string s = "{";
  for (std::size_t i = 0; i < model.members.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(model.members[i] + 1);
  }
  return s + "}";
}

}  // namespace

SteadyTarget compute_setpoint(const CoalitionModel& model, const Vector& offtakes,
                              const Vector& disturbance) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  if (offtakes.size() != model.phi.cols() || disturbance.size() != model.channel_dim()) {
    throw DimensionError("setpoint data does not match coalition " + coalition_name(model));
  }
  Matrix lhs = Matrix::Zero(n + m, n + m);
  lhs.topLeftCorner(n, n) = Matrix::Identity(n, n) - model.xi;
  lhs.topRightCorner(n, m) = -model.upsilon;
  lhs.bottomLeftCorner(m, n) = model.gamma;
  SteadyTarget t;
  t.rhs = model.phi * offtakes;
  if (model.channel_dim() > 0) t.rhs += model.psi * disturbance;
  Vector rhs = Vector::Zero(n + m);
  rhs.head(n) = t.rhs;
  Vector sol;
  try {
    sol = solve_linear(lhs, rhs);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError("steady-state system singular for coalition " +
                              coalition_name(model) + ": " + e.what());
  }
  t.state = sol.head(n);
  t.input = sol.tail(m);
  return t;
}

Setpoint feasible_setpoint(const CoalitionModel& model, const SteadyTarget& target,
                           const Vector& current_state, const Matrix& gain,
                           const ControllerConfig& config) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int nf = static_cast<int>(model.flow_selector.rows());
  const int nv = 2 * n + m;
  const double umax = config.max_flow_increment;

  QpProblem qp;
  qp.hessian = Matrix::Zero(nv, nv);
  qp.hessian.topLeftCorner(n, n) = 2.0 * model.level_weight(config.level_weight);
  qp.hessian.block(n, n, m, m) = 2.0 * model.input_weight(config.input_weight);
  qp.hessian.bottomRightCorner(n, n) = 2.0 * config.setpoint_slack_weight * Matrix::Identity(n, n);
  qp.linear = Vector::Zero(nv);
  qp.linear.segment(n, m) = -2.0 * config.input_weight * target.input;

  qp.eq_matrix = Matrix::Zero(n, nv);
  qp.eq_matrix.leftCols(n) = Matrix::Identity(n, n) - model.xi;
  qp.eq_matrix.middleCols(n, m) = -model.upsilon;
  qp.eq_matrix.rightCols(n) = -Matrix::Identity(n, n);
  qp.eq_rhs = target.rhs;

  // -Φ_flow ξˢ <= -floor;  ±(-K ξˢ + υˢ) <= umax ∓ K ξ(k)
  qp.ineq_matrix = Matrix::Zero(nf + 2 * m, nv);
  qp.ineq_rhs = Vector::Zero(nf + 2 * m);
  qp.ineq_matrix.topLeftCorner(nf, n) = -model.flow_selector;
  qp.ineq_rhs.head(nf).setConstant(-config.flow_floor);
  const Vector kx = gain * current_state;
  qp.ineq_matrix.block(nf, 0, m, n) = -gain;
  qp.ineq_matrix.block(nf, n, m, m) = Matrix::Identity(m, m);
  qp.ineq_rhs.segment(nf, m) = Vector::Constant(m, umax) - kx;
  qp.ineq_matrix.block(nf + m, 0, m, n) = gain;
  qp.ineq_matrix.block(nf + m, n, m, m) = -Matrix::Identity(m, m);
  qp.ineq_rhs.segment(nf + m, m) = Vector::Constant(m, umax) + kx;

  // Feasible by construction: flows lifted to the floor, the input offset
  // kept inside the box around K(ξˢ - ξ), and σ absorbing the residual.
  Vector xs = target.state;
  for (int r = 0; r < nf; ++r) {
    for (int c = 0; c < n; ++c) {
      if (model.flow_selector(r, c) != 0.0) xs(c) = std::max(xs(c), config.flow_floor);
    }
  }
  const Vector centre = gain * xs - kx;
  const Vector us = target.input.cwiseMax((centre.array() - umax).matrix())
                        .cwiseMin((centre.array() + umax).matrix());
  Vector guess(nv);
  guess << xs, us, (Matrix::Identity(n, n) - model.xi) * xs - model.upsilon * us - target.rhs;
  QpOptions opt;
  opt.initial_guess = guess;
  const QpSolution sol = solve_qp(qp, opt);

  Setpoint sp;
  sp.status = sol.status;
  sp.feasible = sol.status != QpStatus::kInfeasible;
  if (sp.feasible) {
    sp.state = sol.x.head(n);
    sp.input = sol.x.segment(n, m);
    sp.slack = sol.x.tail(n);
  } else {
    sp.state = target.state;
    sp.input = target.input;
    sp.slack = Vector::Zero(n);
  }
  return sp;
}

MpcFormulation build_mpc(const CoalitionModel& model, const Matrix& gain, const Matrix& terminal,
                         const ControllerConfig& config) {
  MpcFormulation f;
  const int n = model.state_dim();
  const int m = model.input_dim();
  const int np = config.prediction_horizon;
  const int nc = config.control_horizon;
  const int nf = static_cast<int>(model.flow_selector.rows());
  const int nu = m * nc;
  const int nv = nu + nf * np;
  f.state_dim = n;
  f.input_dim = m;
  f.num_flows = nf;
  f.prediction_horizon = np;
  f.control_horizon = nc;
  f.max_input = config.max_flow_increment;
  f.flow_floor = config.flow_floor;
  f.gain = gain;
  f.closed_loop = model.xi + model.upsilon * gain;
  f.upsilon = model.upsilon;
  f.flow_selector = model.flow_selector;

  const Matrix q = model.level_weight(config.level_weight);
  const Matrix r = model.input_weight(config.input_weight);

  // ζ(t) = sx[t] ζ0 + su[t] U ;  ν(t) = K ζ(t) + υ'(t)
  std::vector<Matrix> sx(static_cast<std::size_t>(np) + 1), su(static_cast<std::size_t>(np) + 1);
  sx[0] = Matrix::Identity(n, n);
  su[0] = Matrix::Zero(n, nu);
  auto move_selector = [&](int t) {
    Matrix e = Matrix::Zero(m, nu);
    if (t < nc) e.middleCols(t * m, m) = Matrix::Identity(m, m);
    return e;
  };
  for (int t = 0; t < np; ++t) {
    sx[t + 1] = f.closed_loop * sx[t];
    su[t + 1] = f.closed_loop * su[t] + model.upsilon * move_selector(t);
  }

  Matrix huu = Matrix::Zero(nu, nu);
  Matrix fu = Matrix::Zero(nu, n);
  for (int t = 0; t < np; ++t) {
    const Matrix gt = gain * su[t] + move_selector(t);
    const Matrix kxt = gain * sx[t];
    huu += su[t].transpose() * q * su[t] + gt.transpose() * r * gt;
    fu += su[t].transpose() * q * sx[t] + gt.transpose() * r * kxt;
  }
  huu += su[np].transpose() * terminal * su[np];
  fu += su[np].transpose() * terminal * sx[np];

  f.hessian = Matrix::Zero(nv, nv);
  f.hessian.topLeftCorner(nu, nu) = 2.0 * 0.5 * (huu + huu.transpose());
  f.hessian.bottomRightCorner(nv - nu, nv - nu) =
      2.0 * config.slack_weight * Matrix::Identity(nv - nu, nv - nu);
  f.linear_map = Matrix::Zero(nv, n);
  f.linear_map.topRows(nu) = 2.0 * fu;

  const int n_box = 2 * m * (np + 1);
  const int n_floor = nf * np;
  const int rows = n_box + 2 * n_floor;
  f.ineq_matrix = Matrix::Zero(rows, nv);
  f.ineq_offset = Vector::Zero(rows);
  f.ineq_state_map = Matrix::Zero(rows, n);
  f.ineq_input_map = Matrix::Zero(rows, m);
  f.ineq_setpoint_map = Matrix::Zero(rows, n);
  int row = 0;
  for (int t = 0; t <= np; ++t) {
    const Matrix gt = gain * su[t] + move_selector(t);
    const Matrix kxt = gain * sx[t];
    for (int sign : {1, -1}) {
      f.ineq_matrix.block(row, 0, m, nu) = sign * gt;
      f.ineq_offset.segment(row, m).setConstant(config.max_flow_increment);
      f.ineq_state_map.block(row, 0, m, n) = -sign * kxt;
      f.ineq_input_map.block(row, 0, m, m) = -sign * Matrix::Identity(m, m);
      row += m;
    }
  }
  for (int t = 1; t <= np; ++t) {
    const int slack_col = nu + (t - 1) * nf;
    f.ineq_matrix.block(row, 0, nf, nu) = -model.flow_selector * su[t];
    f.ineq_matrix.block(row, slack_col, nf, nf) = -Matrix::Identity(nf, nf);
    f.ineq_offset.segment(row, nf).setConstant(-config.flow_floor);
    f.ineq_state_map.block(row, 0, nf, n) = model.flow_selector * sx[t];
    f.ineq_setpoint_map.block(row, 0, nf, n) = model.flow_selector;
    row += nf;
  }
  for (int k = 0; k < n_floor; ++k) {
    f.ineq_matrix(row + k, nu + k) = -1.0;
  }
  f.factorization = std::make_shared<const QpFactorization>(f.hessian, Matrix(0, nv), f.ineq_matrix);
  return f;
}

MpcResult mpc_step(const MpcFormulation& form, const Vector& shifted_state,
                   const Setpoint& setpoint) {
  const int n = form.state_dim;
  const int m = form.input_dim;
  const int nu = form.input_decision_vars();
  const int ns = form.slack_decision_vars();
  if (shifted_state.size() != n || setpoint.input.size() != m || setpoint.state.size() != n) {
    throw DimensionError("MPC data does not match the formulation");
  }

  QpProblem qp;
  qp.hessian = form.hessian;
  qp.linear = form.linear_map * shifted_state;
  qp.eq_matrix = Matrix(0, nu + ns);
  qp.eq_rhs = Vector(0);
  qp.ineq_matrix = form.ineq_matrix;
  qp.ineq_rhs = form.ineq_offset + form.ineq_state_map * shifted_state +
                form.ineq_input_map * setpoint.input + form.ineq_setpoint_map * setpoint.state;

  // Saturated feedback along the horizon with slacks covering the floor.
  Vector guess = Vector::Zero(nu + ns);
  Vector z = shifted_state;
  for (int t = 0; t <= form.prediction_horizon; ++t) {
    if (t >= 1) {
      const Vector flows = form.flow_selector * (z + setpoint.state);
      for (int i = 0; i < form.num_flows; ++i) {
        guess(nu + (t - 1) * form.num_flows + i) = std::max(0.0, form.flow_floor - flows(i));
      }
    }
    if (t == form.prediction_horizon) break;
    Vector move = Vector::Zero(m);
    if (t < form.control_horizon) {
      const Vector v = form.gain * z + setpoint.input;
      move = v.cwiseMax(-form.max_input).cwiseMin(form.max_input) - v;
      guess.segment(t * m, m) = move;
    }
    z = form.closed_loop * z + form.upsilon * move;
  }
  QpOptions opt;
  opt.initial_guess = guess;
  const QpSolution sol =
      form.factorization ? solve_qp(qp, *form.factorization, opt) : solve_qp(qp, opt);

  MpcResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.input_decision_vars = nu;
  res.slack_decision_vars = ns;
  res.moves = sol.x.head(nu);
  res.slacks = sol.x.tail(ns);
  return res;
}

MpcResult mpc_step(const CoalitionModel& model, const Vector& shifted_state,
                   const Setpoint& setpoint, const Matrix& gain, const Matrix& terminal,
                   const ControllerConfig& config) {
  return mpc_step(build_mpc(model, gain, terminal, config), shifted_state, setpoint);
}

Vector control_action(const Vector& shifted_state, const Vector& setpoint_input,
                      const Vector& moves, const Matrix& gain) {
  return gain * shifted_state + setpoint_input + moves.head(setpoint_input.size());
}

CoalitionController::CoalitionController(CoalitionModel model, Matrix gain, Matrix terminal,
                                         const ControllerConfig& config)
    : model_(std::move(model)),
      gain_(std::move(gain)),
      terminal_(std::move(terminal)),
      config_(config),
      mpc_(build_mpc(model_, gain_, terminal_, config_)) {}

void CoalitionController::warm_start(const HistoryBuffer& history, const Measurement& latest) {
  filter_ = kf_init(model_, config_.kalman, history, latest);
  started_ = true;
  has_pending_ = false;
}

ControllerOutput CoalitionController::step(const Measurement& y, const Vector& global_offtakes) {
  if (!started_) {
    warm_start(HistoryBuffer(0), y);
  } else if (has_pending_) {
    filter_ = kf_update(filter_, model_, config_.kalman, pending_inputs_, pending_offtakes_, y);
  }

  ControllerOutput out;
  const Vector offtakes = member_slice(model_, global_offtakes);
  out.state_estimate = filter_.state();
  out.disturbance_estimate = filter_.disturbance();
  out.target = compute_setpoint(model_, offtakes, out.disturbance_estimate);
  out.setpoint = feasible_setpoint(model_, out.target, out.state_estimate, gain_, config_);

  const Vector zeta = out.state_estimate - out.setpoint.state;
  out.mpc = mpc_step(mpc_, zeta, out.setpoint);
  Vector moves = out.mpc.moves;
  if (out.mpc.status == QpStatus::kInfeasible) {
    const Vector v = gain_ * zeta + out.setpoint.input;
    moves = Vector::Zero(mpc_.input_decision_vars());
    moves.head(v.size()) =
        v.cwiseMax(-config_.max_flow_increment).cwiseMin(config_.max_flow_increment) - v;
    out.fallback = true;
  }
  // The QP meets the box to within its feasibility tolerance; round onto it.
  out.inputs = control_action(zeta, out.setpoint.input, moves, gain_)
                   .cwiseMax(-config_.max_flow_increment)
                   .cwiseMin(config_.max_flow_increment);

  pending_inputs_ = out.inputs;
  pending_offtakes_ = offtakes;
  has_pending_ = true;
  last_setpoint_ = out.setpoint;
  has_setpoint_ = true;
  return out;
}

}  // namespace coalmpc
