#pragma once

#include <stdexcept>
#include <string>

#include "coalmpc/simulator.hpp"

namespace coalmpc {

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A persisted trace: provenance header plus the per-step table.
struct TraceFile {
  std::string config_hash;
  std::string version;
  SimTrace trace;
};

/// Comma-separated, '#' header lines, then one row per step:
///   step, (e_i, q_i, dq_i, offtake_i) for each reach, topology,
///   performance_cost, links, coalitions, input_decision_vars,
///   slack_decision_vars.
/// Reals are written with 17 significant digits so reading back is exact.
void write_trace(const SimTrace& trace, const std::string& path, const std::string& config_hash);
TraceFile read_trace(const std::string& path);

/// Number of columns for a canal of `num_reaches`.
int trace_columns(int num_reaches);

/// One row per coalition per step: setpoint, σ, ω̂, QP status, variables.
void write_controller_log(const SimTrace& trace, const std::string& path);
/// One row per supervisor decision with every candidate's value.
void write_selection_log(const SimTrace& trace, const std::string& path);

/// Writes level_errors.csv, inflows.csv, link_raster.csv and
/// accumulated_costs.csv into `directory`.
void emit_plot_data(const SimTrace& trace, double link_cost, const std::string& directory);

}  // namespace coalmpc
