#include "coalmpc/topology.hpp"

#include <bit>
#include <stdexcept>

namespace coalmpc {

Topology::Topology(int num_agents, std::uint64_t mask) : num_agents_(num_agents), mask_(mask) {
  if (num_agents < 1 || num_agents > 64) throw std::invalid_argument("agent count must be in [1, 64]");
  const int links = num_links();
  const std::uint64_t valid = links >= 64 ? ~0ull : ((1ull << links) - 1);
  if (mask & ~valid) throw std::invalid_argument("topology mask enables a nonexistent link");
}

Topology Topology::full(int num_agents) {
  const int links = num_agents - 1;
  return Topology(num_agents, links >= 64 ? ~0ull : ((1ull << links) - 1));
}

Topology Topology::from_bit_string(const std::string& bits) {
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      mask |= 1ull << i;
    } else if (bits[i] != '0') {
      throw std::invalid_argument("topology bit string must contain only 0/1");
    }
  }
  return Topology(static_cast<int>(bits.size()) + 1, mask);
}

int Topology::link_count() const { return std::popcount(mask_); }

Topology Topology::toggled(int link) const {
  if (link < 0 || link >= num_links()) throw std::out_of_range("link index out of range");
  return Topology(num_agents_, mask_ ^ (1ull << link));
}

int Topology::distance(const Topology& other) const {
  return std::popcount(mask_ ^ other.mask_);
}

std::string Topology::bit_string() const {
  std::string s(static_cast<std::size_t>(num_links()), '0');
  for (int i = 0; i < num_links(); ++i) {
    if (enabled(i)) s[static_cast<std::size_t>(i)] = '1';
  }
  return s;
}

std::string Partition::key() const {
  std::string k;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) k += '|';
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      if (i) k += '-';
      k += std::to_string(blocks[b][i]);
    }
  }
  return k;
}

int Partition::block_of(int agent) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (int a : blocks[b]) {
      if (a == agent) return static_cast<int>(b);
    }
  }
  return -1;
}

Partition partition_of(const Topology& t) {
  Partition p;
  std::vector<int> block{0};
  for (int i = 0; i < t.num_links(); ++i) {
    if (!t.enabled(i)) {
      p.blocks.push_back(std::move(block));
      block.clear();
    }
    block.push_back(i + 1);
  }
  p.blocks.push_back(std::move(block));
  return p;
}

std::vector<Topology> candidate_set(const Topology& current) {
  std::vector<Topology> out{current};
  for (int i = 0; i < current.num_links(); ++i) out.push_back(current.toggled(i));
  return out;
}

double network_cost_total(const Topology& t, double link_cost, int decision_interval) {
  return link_cost * t.link_count() * decision_interval;
}

double network_cost_agent(const Topology& t, int agent, double link_cost, int horizon) {
  if (agent < 0 || agent >= t.num_agents()) throw std::out_of_range("agent index out of range");
  int incident = 0;
  if (agent > 0 && t.enabled(agent - 1)) ++incident;
  if (agent < t.num_links() && t.enabled(agent)) ++incident;
  return horizon * (link_cost / 2.0) * incident;
}

}  // namespace coalmpc
