#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "coalmpc/canal_model.hpp"
#include "coalmpc/topology.hpp"

namespace coalmpc {

/// LQ gain and cost matrix of one coalition's decoupled model.
struct CoalitionGain {
  CoalitionModel model;
  Matrix k;  // m_i x n_i
  Matrix p;  // n_i x n_i
  double dare_residual = 0;
  double lyapunov_residual = 0;
};

/// Gains for every block of a partition, in partition order.
struct GainSet {
  Partition partition;
  std::vector<CoalitionGain> coalitions;

  /// Block-diagonal K and P in partition order.
  Matrix k_global() const;
  Matrix p_global() const;
  double max_lyapunov_residual() const;
  double max_dare_residual() const;
};

/// Weights used for synthesis.
struct SynthesisWeights {
  double level_weight = 250.0;
  double input_weight = 2800.0;
};

/// Builds coalition models and solves one DARE per block.
/// Throws ConvergenceError naming the coalition when a block fails.
GainSet synthesize(const Partition& partition, const std::vector<SubsystemModel>& subsystems,
                   const SynthesisWeights& weights);

/// Thread-safe store of gain sets keyed by partition, with a per-coalition
/// memo underneath so that partitions sharing blocks share the DAREs.
class SynthesisCache {
 public:
  SynthesisCache(std::vector<SubsystemModel> subsystems, SynthesisWeights weights,
                 bool enabled = true);

  std::shared_ptr<const GainSet> get(const Partition& partition);

  bool enabled() const { return enabled_; }
  std::size_t hits() const;
  std::size_t misses() const;
  const std::vector<SubsystemModel>& subsystems() const { return subsystems_; }
  const SynthesisWeights& weights() const { return weights_; }

 private:
  struct BlockGain {
    Matrix k, p;
    double dare_residual, lyapunov_residual;
  };
  BlockGain block_gain(const CoalitionModel& model);

  std::vector<SubsystemModel> subsystems_;
  SynthesisWeights weights_;
  bool enabled_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const GainSet>> partitions_;
  std::map<std::string, BlockGain> blocks_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Latest setpoints published by the coalitions, in chain-ordered global
/// layout (state) and one entry per gate (input).
struct PublishedSetpoints {
  Vector state;
  Vector input;

  /// Steady state at the measured gate flows: every flow state of reach i
  /// equals q_i(k-1), zero level errors, zero increments.
  static PublishedSetpoints bootstrap(const std::vector<SubsystemModel>& subsystems,
                                      const Vector& gate_flows);
};

/// ω̂ of a coalition from its neighbors' published setpoints, one entry per
/// coupling channel.
Vector estimate_cross_effects(const CoalitionModel& model,
                              const std::vector<int>& global_offsets,
                              const PublishedSetpoints& published);

struct SupervisorConfig {
  double link_cost = 0.6;
  int decision_interval = 4;  // T_Λ [samples]
  bool parallel = true;
};

struct CandidateValue {
  Topology topology;
  double performance = 0;  // Σ ζ'Pζ
  double network = 0;      // c_l |Λ| T_Λ
  double value() const { return performance + network; }
};

/// Σ_i ζ_i'P_i ζ_i + c_l |Λ| T_Λ with ζ_i measured from the zero-error
/// steady state of each coalition under the candidate partition.
CandidateValue topology_value(const Vector& global_state, const Topology& candidate,
                              const GainSet& gains, const Vector& offtakes,
                              const PublishedSetpoints& published,
                              const SupervisorConfig& config);

/// Reference implementation; candidates in order.
std::vector<CandidateValue> evaluate_candidates_serial(
    const Vector& global_state, const std::vector<Topology>& candidates, SynthesisCache& cache,
    const Vector& offtakes, const PublishedSetpoints& published, const SupervisorConfig& config);

/// Same results as the serial version; candidates evaluated with OpenMP.
std::vector<CandidateValue> evaluate_candidates_parallel(
    const Vector& global_state, const std::vector<Topology>& candidates, SynthesisCache& cache,
    const Vector& offtakes, const PublishedSetpoints& published, const SupervisorConfig& config);

/// Index of the minimizer: lowest value, then fewer links, then the
/// lexicographically smallest bit string.
std::size_t argmin_candidate(const std::vector<CandidateValue>& values);

struct Selection {
  Topology topology;
  std::shared_ptr<const GainSet> gains;
  std::vector<CandidateValue> candidates;
};

Selection select_topology(const Vector& global_state, const Topology& incumbent,
                          SynthesisCache& cache, const Vector& offtakes,
                          const PublishedSetpoints& published, const SupervisorConfig& config);

}  // namespace coalmpc
