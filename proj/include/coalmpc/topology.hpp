#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace coalmpc {

/// Enabled subset of the chain links l_{i,i+1}. Link i joins agents i and
/// i+1 (0-based).
class Topology {
 public:
  Topology() = default;
  explicit Topology(int num_agents, std::uint64_t mask = 0);

  static Topology empty(int num_agents) { return Topology(num_agents, 0); }
  static Topology full(int num_agents);
  /// Parses upstream-to-downstream '0'/'1' flags.
  static Topology from_bit_string(const std::string& bits);

  int num_agents() const { return num_agents_; }
  int num_links() const { return num_agents_ > 0 ? num_agents_ - 1 : 0; }
  bool enabled(int link) const { return (mask_ >> link) & 1u; }
  int link_count() const;
  std::uint64_t mask() const { return mask_; }

  Topology toggled(int link) const;
  /// Number of links in which the two topologies differ.
  int distance(const Topology& other) const;
  std::string bit_string() const;

  auto operator<=>(const Topology&) const = default;

 private:
  int num_agents_ = 0;
  std::uint64_t mask_ = 0;
};

/// Disjoint coalitions covering all agents, blocks sorted by smallest member.
struct Partition {
  std::vector<std::vector<int>> blocks;

  std::size_t size() const { return blocks.size(); }
  /// Canonical text key, e.g. "0-1-2|3|4-5".
  std::string key() const;
  int block_of(int agent) const;

  bool operator==(const Partition&) const = default;
};

/// Connected components of (agents, enabled links).
Partition partition_of(const Topology& t);

/// Incumbent first, then every single-link toggle in link order.
std::vector<Topology> candidate_set(const Topology& current);

/// c_l * |enabled| * T_lambda.
double network_cost_total(const Topology& t, double link_cost, int decision_interval);

/// N_p * (c_l / 2) * (enabled links incident to agent j).
double network_cost_agent(const Topology& t, int agent, double link_cost, int horizon);

}  // namespace coalmpc
