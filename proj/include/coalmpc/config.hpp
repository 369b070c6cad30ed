#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coalmpc/simulator.hpp"

namespace coalmpc {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Everything one CLI invocation needs.
struct RunConfig {
  std::vector<ReachParams> reaches;
  ControllerConfig controller;
  Scenario scenario;
  PlantConfig plant;
  int decision_interval = 4;  // T_Λ
  std::vector<double> sweep{0.0, 0.15, 0.3, 0.6, 1.2, 2.4};
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  bool use_cache = true;
  bool parallel = true;

  SimulationOptions simulation_options() const;
  /// Full-field validation; throws std::invalid_argument naming the field.
  void validate() const;
};

/// Defaults: Dez canal, default controller weights, Scenario 1.
RunConfig default_config();

/// Parses a JSON document. Parse errors carry `source:line`; validation
/// errors name the field.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

std::string dump_config(const RunConfig& config);

/// FNV-1a over the canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Scenario presets by name: scenario1, scenario2, steady.
Scenario scenario_by_name(const std::string& name);

}  // namespace coalmpc
