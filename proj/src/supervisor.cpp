#include "coalmpc/supervisor.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <string>

#include "coalmpc/coalition_controller.hpp"

namespace coalmpc {

Matrix GainSet::k_global() const {
  std::vector<Matrix> blocks;
  for (const auto& c : coalitions) blocks.push_back(c.k);
  return block_diagonal(blocks);
}

Matrix GainSet::p_global() const {
  std::vector<Matrix> blocks;
  for (const auto& c : coalitions) blocks.push_back(c.p);
  return block_diagonal(blocks);
}

double GainSet::max_lyapunov_residual() const {
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& c : coalitions) r = std::max(r, c.lyapunov_residual);
  return r;
}

double GainSet::max_dare_residual() const {
  double r = 0;
  for (const auto& c : coalitions) r = std::max(r, c.dare_residual);
  return r;
}

namespace {

std::string members_key(const std::vector<int>& members) {
  std::string k;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i) k += '-';
    k += std::to_string(members[i]);
  }
  return k;
}

CoalitionGain solve_block(const CoalitionModel& model, const SynthesisWeights& w) {
  CoalitionGain g;
  g.model = model;
  const Matrix q = model.level_weight(w.level_weight);
  const Matrix r = model.input_weight(w.input_weight);
  try {
    g.p = solve_dare(model.xi, model.upsilon, q, r);
  } catch (const std::exception& e) {
    throw ConvergenceError("gain synthesis failed for coalition {" + members_key(model.members) +
                           "}: " + e.what());
  }
  g.k = lqr_gain(model.xi, model.upsilon, r, g.p);
  g.dare_residual = riccati_residual(model.xi, model.upsilon, q, r, g.p);
  g.lyapunov_residual = lyapunov_residual(model.xi + model.upsilon * g.k, g.p, q, r, g.k);
  return g;
}

}  // namespace

GainSet synthesize(const Partition& partition, const std::vector<SubsystemModel>& subsystems,
                   const SynthesisWeights& weights) {
  GainSet set;
  set.partition = partition;
  for (const auto& block : partition.blocks) {
    set.coalitions.push_back(
        solve_block(build_coalition_model(subsystems, block, partition.blocks), weights));
  }
  return set;
}

SynthesisCache::SynthesisCache(std::vector<SubsystemModel> subsystems, SynthesisWeights weights,
                               bool enabled)
    : subsystems_(std::move(subsystems)), weights_(weights), enabled_(enabled) {}

std::size_t SynthesisCache::hits() const {
  std::shared_lock lock(mutex_);
  return hits_;
}

std::size_t SynthesisCache::misses() const {
  std::shared_lock lock(mutex_);
  return misses_;
}

SynthesisCache::BlockGain SynthesisCache::block_gain(const CoalitionModel& model) {
  const std::string key = members_key(model.members);
  {
    std::shared_lock lock(mutex_);
    const auto it = blocks_.find(key);
    if (it != blocks_.end()) return it->second;
  }
  const CoalitionGain g = solve_block(model, weights_);
  BlockGain b{g.k, g.p, g.dare_residual, g.lyapunov_residual};
  std::unique_lock lock(mutex_);
  blocks_.emplace(key, b);
  return b;
}

std::shared_ptr<const GainSet> SynthesisCache::get(const Partition& partition) {
  if (!enabled_) return std::make_shared<const GainSet>(synthesize(partition, subsystems_, weights_));
  const std::string key = partition.key();
  {
    std::shared_lock lock(mutex_);
    const auto it = partitions_.find(key);
    if (it != partitions_.end()) {
      lock.unlock();
      std::unique_lock count(mutex_);
      ++hits_;
      return it->second;
    }
  }
  auto set = std::make_shared<GainSet>();
  set->partition = partition;
  for (const auto& block : partition.blocks) {
    CoalitionGain g;
    g.model = build_coalition_model(subsystems_, block, partition.blocks);
    const BlockGain b = block_gain(g.model);
    g.k = b.k;
    g.p = b.p;
    g.dare_residual = b.dare_residual;
    g.lyapunov_residual = b.lyapunov_residual;
    set->coalitions.push_back(std::move(g));
  }
  std::unique_lock lock(mutex_);
  ++misses_;
  const auto [it, inserted] = partitions_.emplace(key, std::move(set));
  return it->second;
}

PublishedSetpoints PublishedSetpoints::bootstrap(const std::vector<SubsystemModel>& subsystems,
                                                 const Vector& gate_flows) {
  const auto offsets = global_state_offsets(subsystems);
  PublishedSetpoints p;
  p.state = Vector::Zero(offsets.back());
  p.input = Vector::Zero(static_cast<Eigen::Index>(subsystems.size()));
  for (std::size_t i = 0; i < subsystems.size(); ++i) {
    p.state.segment(offsets[i], subsystems[i].delay).setConstant(gate_flows(static_cast<Eigen::Index>(i)));
  }
  return p;
}

Vector estimate_cross_effects(const CoalitionModel& model, const std::vector<int>& global_offsets,
                              const PublishedSetpoints& published) {
  Vector w(model.channel_dim());
  for (std::size_t c = 0; c < model.channels.size(); ++c) {
    const int j = model.channels[c].neighbor;
    // Unit channel: flow through gate j, q_j(k-1) + dq_j(k).
    w(static_cast<Eigen::Index>(c)) =
        published.state(global_offsets[static_cast<std::size_t>(j)]) + published.input(j);
  }
  return w;
}

CandidateValue topology_value(const Vector& global_state, const Topology& candidate,
                              const GainSet& gains, const Vector& offtakes,
                              const PublishedSetpoints& published,
                              const SupervisorConfig& config) {
  if (!(gains.partition == partition_of(candidate))) {
    throw std::invalid_argument("gain set does not belong to the candidate topology");
  }
  std::vector<int> offsets;
  int n = 0;
  CandidateValue v;
  v.topology = candidate;
  // Global offsets follow chain order; rebuild them from the block models.
  {
    const int agents = candidate.num_agents();
    offsets.assign(static_cast<std::size_t>(agents) + 1, 0);
    std::vector<int> dims(static_cast<std::size_t>(agents), 0);
    for (const auto& c : gains.coalitions) {
      for (std::size_t li = 0; li < c.model.members.size(); ++li) {
        const int end = li + 1 < c.model.members.size() ? c.model.state_offsets[li + 1]
                                                        : c.model.state_dim();
        dims[static_cast<std::size_t>(c.model.members[li])] = end - c.model.state_offsets[li];
      }
    }
    for (int i = 0; i < agents; ++i) {
      offsets[static_cast<std::size_t>(i) + 1] = offsets[static_cast<std::size_t>(i)] + dims[static_cast<std::size_t>(i)];
    }
    n = offsets.back();
  }
  if (global_state.size() != n) throw DimensionError("global state does not match the canal");
  for (const auto& c : gains.coalitions) {
    const Vector w = estimate_cross_effects(c.model, offsets, published);
    const SteadyTarget target = compute_setpoint(c.model, member_slice(c.model, offtakes), w);
    const Vector zeta = gather_state(c.model, offsets, global_state) - target.state;
    v.performance += zeta.dot(c.p * zeta);
  }
  v.network = network_cost_total(candidate, config.link_cost, config.decision_interval);
  return v;
}

namespace {

CandidateValue evaluate_one(const Vector& x, const Topology& t, SynthesisCache& cache,
                            const Vector& offtakes, const PublishedSetpoints& published,
                            const SupervisorConfig& config) {
  const auto gains = cache.get(partition_of(t));
  return topology_value(x, t, *gains, offtakes, published, config);
}

}  // namespace

std::vector<CandidateValue> evaluate_candidates_serial(
    const Vector& global_state, const std::vector<Topology>& candidates, SynthesisCache& cache,
    const Vector& offtakes, const PublishedSetpoints& published, const SupervisorConfig& config) {
  std::vector<CandidateValue> out;
  out.reserve(candidates.size());
  for (const auto& t : candidates) {
    out.push_back(evaluate_one(global_state, t, cache, offtakes, published, config));
  }
  return out;
}

std::vector<CandidateValue> evaluate_candidates_parallel(
    const Vector& global_state, const std::vector<Topology>& candidates, SynthesisCache& cache,
    const Vector& offtakes, const PublishedSetpoints& published, const SupervisorConfig& config) {
  const auto count = static_cast<long>(candidates.size());
  std::vector<CandidateValue> out(candidates.size());
  std::vector<std::exception_ptr> errors(candidates.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      out[idx] = evaluate_one(global_state, candidates[idx], cache, offtakes, published, config);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::size_t argmin_candidate(const std::vector<CandidateValue>& values) {
  if (values.empty()) throw std::invalid_argument("no candidates to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const CandidateValue& a = values[i];
    const CandidateValue& b = values[best];
    if (a.value() != b.value()) {
      if (a.value() < b.value()) best = i;
      continue;
    }
    const int la = a.topology.link_count();
    const int lb = b.topology.link_count();
    if (la != lb) {
      if (la < lb) best = i;
      continue;
    }
    if (a.topology.bit_string() < b.topology.bit_string()) best = i;
  }
  return best;
}

Selection select_topology(const Vector& global_state, const Topology& incumbent,
                          SynthesisCache& cache, const Vector& offtakes,
                          const PublishedSetpoints& published, const SupervisorConfig& config) {
  const auto candidates = candidate_set(incumbent);
  Selection s;
  s.candidates = config.parallel
                     ? evaluate_candidates_parallel(global_state, candidates, cache, offtakes,
                                                    published, config)
                     : evaluate_candidates_serial(global_state, candidates, cache, offtakes,
                                                  published, config);
  s.topology = s.candidates[argmin_candidate(s.candidates)].topology;
  s.gains = cache.get(partition_of(s.topology));
  return s;
}

}  // namespace coalmpc
