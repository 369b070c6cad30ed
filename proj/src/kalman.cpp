#include "coalmpc/kalman.hpp"

namespace coalmpc {

Vector member_slice(const CoalitionModel& model, const Vector& global) {
  Vector out(model.size());
  for (int i = 0; i < model.size(); ++i) out(i) = global(model.members[static_cast<std::size_t>(i)]);
  return out;
}

Vector coalition_measurement(const CoalitionModel& model, const Measurement& m) {
  Vector y(2 * model.size());
  y << member_slice(model, m.levels), member_slice(model, m.gate_flows);
  return y;
}

Matrix coalition_output_matrix(const CoalitionModel& model) {
  const int n = model.state_dim();
  Matrix c = Matrix::Zero(2 * model.size(), n + model.channel_dim());
  c.topLeftCorner(model.size(), n) = model.gamma;
  c.bottomLeftCorner(model.size(), n) = model.gate_flow_selector;
  return c;
}

namespace {

Matrix transition(const CoalitionModel& model) {
  const int n = model.state_dim();
  const int w = model.channel_dim();
  Matrix f = Matrix::Identity(n + w, n + w);
  f.topLeftCorner(n, n) = model.xi;
  f.topRightCorner(n, w) = model.psi;
  return f;
}

Matrix process_noise(const CoalitionModel& model, const KalmanSettings& s) {
  const int n = model.state_dim();
  const int w = model.channel_dim();
  Vector diag = Vector::Constant(n + w, s.flow_process_noise);
  for (int i = 0; i < model.size(); ++i) {
    Eigen::Index col;
    model.gamma.row(i).maxCoeff(&col);
    diag(col) = s.level_process_noise;
  }
  diag.tail(w).setConstant(s.disturbance_process_noise);
  return diag.asDiagonal();
}

}  // namespace

KalmanState kf_prior(const CoalitionModel& model, const KalmanSettings& settings,
                     const Measurement& y) {
  const int n = model.state_dim();
  const int w = model.channel_dim();
  KalmanState kf;
  kf.state_dim = n;
  kf.estimate = Vector::Zero(n + w);
  Vector var = Vector::Constant(n + w, settings.prior_flow_variance);
  for (int i = 0; i < model.size(); ++i) {
    const int s = model.members[static_cast<std::size_t>(i)];
    const int off = model.state_offsets[static_cast<std::size_t>(i)];
    Eigen::Index level_col;
    model.gamma.row(i).maxCoeff(&level_col);
    for (int j = off; j < level_col; ++j) kf.estimate(j) = y.gate_flows(s);
    kf.estimate(level_col) = y.levels(s);
    var(level_col) = settings.prior_level_variance;
  }
  for (int c = 0; c < w; ++c) {
    kf.estimate(n + c) = y.gate_flows(model.channels[static_cast<std::size_t>(c)].neighbor);
  }
  var.tail(w).setConstant(settings.prior_disturbance_variance);
  kf.covariance = var.asDiagonal();
  return kf;
}

KalmanState kf_correct(const KalmanState& kf, const CoalitionModel& model,
                       const KalmanSettings& settings, const Measurement& y) {
  const Matrix c = coalition_output_matrix(model);
  const auto dim = kf.estimate.size();
  const Matrix r = settings.measurement_noise * Matrix::Identity(c.rows(), c.rows());
  const Matrix pct = kf.covariance * c.transpose();
  const Matrix innovation_cov = c * pct + r;
  Matrix gain;
  try {
    gain = solve_linear(innovation_cov, Matrix(pct.transpose())).transpose();
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError("Kalman innovation covariance is singular; check noise settings");
  }
  KalmanState out = kf;
  out.estimate += gain * (coalition_measurement(model, y) - c * kf.estimate);
  const Matrix ikc = Matrix::Identity(dim, dim) - gain * c;
  out.covariance = ikc * kf.covariance * ikc.transpose() + gain * r * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  return out;
}

KalmanState kf_update(const KalmanState& kf, const CoalitionModel& model,
                      const KalmanSettings& settings, const Vector& coalition_inputs,
                      const Vector& coalition_offtakes, const Measurement& y) {
  const int n = model.state_dim();
  if (kf.state_dim != n || kf.estimate.size() != n + model.channel_dim() ||
      coalition_inputs.size() != model.input_dim() ||
      coalition_offtakes.size() != model.size()) {
    throw DimensionError("Kalman update data does not match the coalition");
  }
  const Matrix f = transition(model);
  KalmanState pred = kf;
  pred.estimate = f * kf.estimate;
  pred.estimate.head(n) += model.upsilon * coalition_inputs + model.phi * coalition_offtakes;
  pred.covariance = f * kf.covariance * f.transpose() + process_noise(model, settings);
  return kf_correct(pred, model, settings, y);
}

KalmanState kf_init(const CoalitionModel& model, const KalmanSettings& settings,
                    const HistoryBuffer& history, const Measurement& latest) {
  if (history.empty()) return kf_correct(kf_prior(model, settings, latest), model, settings, latest);
  KalmanState kf = kf_prior(model, settings, history[0].measurement);
  kf = kf_correct(kf, model, settings, history[0].measurement);
  for (std::size_t j = 0; j < history.size(); ++j) {
    const Measurement& next = j + 1 < history.size() ? history[j + 1].measurement : latest;
    kf = kf_update(kf, model, settings, member_slice(model, history[j].inputs),
                   member_slice(model, history[j].offtakes), next);
  }
  return kf;
}

}  // namespace coalmpc
