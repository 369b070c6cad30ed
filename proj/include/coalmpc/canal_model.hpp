#pragma once

#include <vector>

#include "coalmpc/numerics.hpp"

namespace coalmpc {

/// Identified integrator-delay parameters of one reach.
struct ReachParams {
  int index = 0;                  // 1-based position along the canal
  double backwater_surface = 0;   // A_s [m^2]
  int delay_steps = 1;            // transport delay [samples]
  double length = 0;              // [m], informational
  double bottom_width = 0;        // [m], informational
};

/// Gate + reach pair in augmented integrator-delay form.
///
/// State layout: [q(k-1), q(k-2), ..., q(k-d), e(k)], flows newest first and
/// the backwater level error last. The input is the gate flow increment.
/// Offtakes and the external channel enter only the level row, with gain
/// -Tc/A_s. The downstream coupling is the flow through the next gate,
/// q_{i+1}(k-1) + dq_{i+1}(k).
struct SubsystemModel {
  int index = 0;  // 0-based subsystem index
  int delay = 1;
  double level_gain = 0;  // Tc / A_s
  bool is_last = false;

  Matrix a;  // n x n
  Matrix b;  // n x 1
  Matrix e;  // n x 1, offtake
  Matrix g;  // n x 1, external channel

  /// Coupling toward the downstream neighbor (absent for the last reach):
  /// A_ij and B_ij of the neighbor term, and their unit-channel factors such
  /// that A_down = g * down_state_selector, B_down = g * down_input_selector.
  Matrix a_down;               // n x n_{i+1}
  Matrix b_down;               // n x 1
  Matrix down_state_selector;  // 1 x n_{i+1}
  Matrix down_input_selector;  // 1 x 1

  int state_dim() const { return delay + 1; }
  int level_row() const { return delay; }
};

/// Builds the subsystem; `downstream_delay` sizes the coupling templates and
/// is ignored when `is_last` holds.
SubsystemModel build_subsystem(const ReachParams& params, double sample_time,
                               bool is_last, int downstream_delay = 1);

/// Subsystems for a whole canal, 0-based, in chain order.
std::vector<SubsystemModel> build_canal(const std::vector<ReachParams>& reaches,
                                        double sample_time);

/// Subsystems whose state or input act on subsystem i (0-based).
std::vector<int> neighborhood(int i, int num_subsystems);

/// External coupling channel of a coalition: member `member`'s level is
/// driven by the gate flow of non-member `neighbor`.
struct CouplingChannel {
  int member = 0;
  int neighbor = 0;
  int neighbor_block = 0;  // index of the neighbor's coalition in the partition
};

/// Ξ_ij and Υ_ij toward one neighboring coalition, in channel rows.
struct NeighborCoupling {
  int block = 0;
  Matrix state;  // channels x n_j
  Matrix input;  // channels x m_j
};

/// Stacked model of a group of subsystems:
///   ξ+ = Ξ ξ + Υ υ + Φ ρ + Ψ ω,   ω = Σ_j Ξ_ij ξ_j + Υ_ij υ_j.
struct CoalitionModel {
  std::vector<int> members;        // ascending subsystem indices
  std::vector<int> state_offsets;  // offset of each member inside ξ
  Matrix xi;       // Ξ_ii
  Matrix upsilon;  // Υ_ii
  Matrix phi;      // Φ_i, one column per member offtake
  Matrix psi;      // Ψ_i, one column per channel
  Matrix gamma;    // Γ_i, level selector
  Matrix flow_selector;       // all flow states of all members
  Matrix gate_flow_selector;  // q_s(k-1) of each member
  std::vector<CouplingChannel> channels;
  std::vector<NeighborCoupling> neighbors;

  int state_dim() const { return static_cast<int>(xi.rows()); }
  int input_dim() const { return static_cast<int>(upsilon.cols()); }
  int channel_dim() const { return static_cast<int>(psi.cols()); }
  int size() const { return static_cast<int>(members.size()); }
  /// Position of subsystem s in `members`, or -1.
  int local_index(int subsystem) const;
  /// Level-only state weight and scalar input weight for this coalition.
  Matrix level_weight(double q) const;
  Matrix input_weight(double r) const;
};

/// Assembles the model of `members`, which must be one block of `partition`.
CoalitionModel build_coalition_model(const std::vector<SubsystemModel>& subsystems,
                                     const std::vector<int>& members,
                                     const std::vector<std::vector<int>>& partition);

/// The whole canal as one coalition.
CoalitionModel build_global_model(const std::vector<SubsystemModel>& subsystems);

/// Offsets of each subsystem's state inside the global (chain-ordered) state.
std::vector<int> global_state_offsets(const std::vector<SubsystemModel>& subsystems);

/// Gathers/scatters a coalition's slice of a chain-ordered global vector.
Vector gather_state(const CoalitionModel& model, const std::vector<int>& global_offsets,
                    const Vector& global_state);
void scatter_state(const CoalitionModel& model, const std::vector<int>& global_offsets,
                   const Vector& local_state, Vector& global_state);

/// Exact steady state with zero level errors and no flow changes for the
/// given offtakes: flows telescope from the tail of the chain.
Vector steady_state(const std::vector<SubsystemModel>& subsystems,
                    const Vector& offtakes);

}  // namespace coalmpc
