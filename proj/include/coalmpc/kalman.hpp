#pragma once

#include <cstddef>
#include <deque>

#include "coalmpc/canal_model.hpp"

namespace coalmpc {

/// Noise settings of the per-coalition disturbance filter (variances).
struct KalmanSettings {
  double flow_process_noise = 1e-4;
  double level_process_noise = 1e-6;
  double disturbance_process_noise = 1e-2;
  double measurement_noise = 1e-4;
  double prior_flow_variance = 1.0;
  double prior_level_variance = 1e-2;
  double prior_disturbance_variance = 1e4;
};

/// What the agents see at one sample: backwater level errors and the flow
/// currently passed by each gate, q_i(k-1), chain ordered.
struct Measurement {
  Vector levels;
  Vector gate_flows;
};

struct HistorySample {
  Measurement measurement;
  Vector inputs;    // applied after the measurement
  Vector offtakes;  // in force during the same step
};

/// Fixed-capacity record of the most recent global samples, oldest first.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(HistorySample sample) {
    if (capacity_ == 0) return;
    if (samples_.size() == capacity_) samples_.pop_front();
    samples_.push_back(std::move(sample));
  }
  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return samples_.empty(); }
  const HistorySample& operator[](std::size_t i) const { return samples_[i]; }
  void clear() { samples_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<HistorySample> samples_;
};

/// Augmented estimate [ξ; ω] and its covariance.
struct KalmanState {
  Vector estimate;
  Matrix covariance;
  int state_dim = 0;

  Vector state() const { return estimate.head(state_dim); }
  Vector disturbance() const { return estimate.tail(estimate.size() - state_dim); }
};

/// Member levels then member gate flows.
Vector coalition_measurement(const CoalitionModel& model, const Measurement& m);
Matrix coalition_output_matrix(const CoalitionModel& model);

/// Prior at the given measurement: member flows at the gate flow, levels as
/// measured, each channel at its neighbor's measured gate flow, diagonal
/// covariance.
KalmanState kf_prior(const CoalitionModel& model, const KalmanSettings& settings,
                     const Measurement& y);

/// Measurement correction only.
KalmanState kf_correct(const KalmanState& kf, const CoalitionModel& model,
                       const KalmanSettings& settings, const Measurement& y);

/// Predict with the previous step's input and offtakes on
///   ξ+ = Ξξ + Υυ + Φρ + Ψω,  ω+ = ω,
/// then correct with the new measurement.
KalmanState kf_update(const KalmanState& kf, const CoalitionModel& model,
                      const KalmanSettings& settings, const Vector& coalition_inputs,
                      const Vector& coalition_offtakes, const Measurement& y);

/// Filter warm start for a newly formed coalition: prior at the oldest
/// buffered sample, then the buffer replayed through the filter, ending with
/// a correction at `latest`.
KalmanState kf_init(const CoalitionModel& model, const KalmanSettings& settings,
                    const HistoryBuffer& history, const Measurement& latest);

/// Slices a chain-ordered vector (one entry per subsystem) to the members.
Vector member_slice(const CoalitionModel& model, const Vector& global);

}  // namespace coalmpc
