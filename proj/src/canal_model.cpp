#include "coalmpc/canal_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace coalmpc {

SubsystemModel build_subsystem(const ReachParams& params, double sample_time,
                               bool is_last, int downstream_delay) {
  if (params.delay_steps < 1) {
    throw std::invalid_argument("reach " + std::to_string(params.index) +
                                ": delay_steps must be >= 1");
  }
  if (!(params.backwater_surface > 0)) {
    throw std::invalid_argument("reach " + std::to_string(params.index) +
                                ": backwater_surface must be positive");
  }
  if (!(sample_time > 0)) throw std::invalid_argument("sample time must be positive");

  SubsystemModel s;
  s.index = params.index - 1;
  s.delay = params.delay_steps;
  s.level_gain = sample_time / params.backwater_surface;
  s.is_last = is_last;

  const int n = s.state_dim();
  const int d = s.delay;
  s.a = Matrix::Zero(n, n);
  s.a(0, 0) = 1.0;  // q(k) = q(k-1) + dq(k)
  for (int j = 1; j < d; ++j) s.a(j, j - 1) = 1.0;
  s.a(d, d) = 1.0;
  s.a(d, d - 1) += s.level_gain;
  s.b = Matrix::Zero(n, 1);
  s.b(0, 0) = 1.0;
  s.e = Matrix::Zero(n, 1);
  s.e(d, 0) = -s.level_gain;
  s.g = s.e;

  if (!is_last) {
    if (downstream_delay < 1) throw std::invalid_argument("downstream delay must be >= 1");
    s.down_state_selector = Matrix::Zero(1, downstream_delay + 1);
    s.down_state_selector(0, 0) = 1.0;
    s.down_input_selector = Matrix::Ones(1, 1);
    s.a_down = s.g * s.down_state_selector;
    s.b_down = s.g * s.down_input_selector;
  }
  return s;
}

std::vector<SubsystemModel> build_canal(const std::vector<ReachParams>& reaches,
                                        double sample_time) {
  std::vector<SubsystemModel> out;
  out.reserve(reaches.size());
  for (std::size_t i = 0; i < reaches.size(); ++i) {
    if (reaches[i].index != static_cast<int>(i) + 1) {
      throw std::invalid_argument("reach indices must be contiguous from 1");
    }
    const bool last = i + 1 == reaches.size();
    const int next_delay = last ? 1 : reaches[i + 1].delay_steps;
    out.push_back(build_subsystem(reaches[i], sample_time, last, next_delay));
  }
  return out;
}

std::vector<int> neighborhood(int i, int num_subsystems) {
  if (i < 0 || i >= num_subsystems) throw std::out_of_range("subsystem index out of range");
  if (i + 1 < num_subsystems) return {i + 1};
  return {};
}

int CoalitionModel::local_index(int subsystem) const {
  const auto it = std::lower_bound(members.begin(), members.end(), subsystem);
  if (it == members.end() || *it != subsystem) return -1;
  return static_cast<int>(it - members.begin());
}

Matrix CoalitionModel::level_weight(double q) const {
  return q * gamma.transpose() * gamma;
}

Matrix CoalitionModel::input_weight(double r) const {
  return r * Matrix::Identity(input_dim(), input_dim());
}

namespace {

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<int> offsets_of(const std::vector<SubsystemModel>& subsystems,
                            const std::vector<int>& members) {
  std::vector<int> offsets;
  int n = 0;
  for (int s : members) {
    offsets.push_back(n);
    n += subsystems.at(static_cast<std::size_t>(s)).state_dim();
  }
  return offsets;
}

}  // namespace

CoalitionModel build_coalition_model(const std::vector<SubsystemModel>& subsystems,
                                     const std::vector<int>& members_in,
                                     const std::vector<std::vector<int>>& partition) {
  const std::vector<int> members = sorted(members_in);
  int own_block = -1;
  std::vector<int> block_of(subsystems.size(), -1);
  for (std::size_t b = 0; b < partition.size(); ++b) {
    for (int s : partition[b]) {
      if (s < 0 || s >= static_cast<int>(subsystems.size())) {
        throw std::invalid_argument("partition refers to unknown subsystem");
      }
      block_of[static_cast<std::size_t>(s)] = static_cast<int>(b);
    }
    if (sorted(partition[b]) == members) own_block = static_cast<int>(b);
  }
  if (own_block < 0 || members.empty()) {
    throw std::invalid_argument("coalition members not found in partition");
  }

  CoalitionModel c;
  c.members = members;
  c.state_offsets = offsets_of(subsystems, members);
  int n = 0, n_flows = 0;
  for (int s : members) {
    n += subsystems[static_cast<std::size_t>(s)].state_dim();
    n_flows += subsystems[static_cast<std::size_t>(s)].delay;
  }
  const int m = static_cast<int>(members.size());

  c.xi = Matrix::Zero(n, n);
  c.upsilon = Matrix::Zero(n, m);
  c.phi = Matrix::Zero(n, m);
  c.gamma = Matrix::Zero(m, n);
  c.flow_selector = Matrix::Zero(n_flows, n);
  c.gate_flow_selector = Matrix::Zero(m, n);

  int flow_row = 0;
  std::vector<Matrix> psi_cols;
  for (int li = 0; li < m; ++li) {
    const SubsystemModel& sub = subsystems[static_cast<std::size_t>(members[li])];
    const int off = c.state_offsets[li];
    const int ns = sub.state_dim();
    c.xi.block(off, off, ns, ns) = sub.a;
    c.upsilon.block(off, li, ns, 1) = sub.b;
    c.phi.block(off, li, ns, 1) = sub.e;
    c.gamma(li, off + sub.level_row()) = 1.0;
    c.gate_flow_selector(li, off) = 1.0;
    for (int j = 0; j < sub.delay; ++j) c.flow_selector(flow_row++, off + j) = 1.0;

    if (sub.is_last) continue;
    const int next = members[li] + 1;
    const int lj = c.local_index(next);
    if (lj >= 0) {
      const int noff = c.state_offsets[lj];
      c.xi.block(off, noff, ns, sub.a_down.cols()) += sub.a_down;
      c.upsilon.block(off, lj, ns, 1) += sub.b_down;
    } else {
      CouplingChannel ch;
      ch.member = members[li];
      ch.neighbor = next;
      ch.neighbor_block = block_of[static_cast<std::size_t>(next)];
      c.channels.push_back(ch);
      Matrix col = Matrix::Zero(n, 1);
      col.block(off, 0, ns, 1) = sub.g;
      psi_cols.push_back(col);
    }
  }
  c.psi = Matrix::Zero(n, static_cast<Eigen::Index>(psi_cols.size()));
  for (std::size_t k = 0; k < psi_cols.size(); ++k) {
    c.psi.col(static_cast<Eigen::Index>(k)) = psi_cols[k].col(0);
  }

  // Ξ_ij / Υ_ij per neighboring coalition, rows indexed by channel.
  const auto n_ch = static_cast<Eigen::Index>(c.channels.size());
  for (std::size_t k = 0; k < c.channels.size(); ++k) {
    const CouplingChannel& ch = c.channels[k];
    auto it = std::find_if(c.neighbors.begin(), c.neighbors.end(),
                           [&](const NeighborCoupling& nc) { return nc.block == ch.neighbor_block; });
    const std::vector<int> nmembers = sorted(partition[static_cast<std::size_t>(ch.neighbor_block)]);
    const std::vector<int> noffsets = offsets_of(subsystems, nmembers);
    int nn = 0;
    for (int s : nmembers) nn += subsystems[static_cast<std::size_t>(s)].state_dim();
    if (it == c.neighbors.end()) {
      NeighborCoupling nc;
      nc.block = ch.neighbor_block;
      nc.state = Matrix::Zero(n_ch, nn);
      nc.input = Matrix::Zero(n_ch, static_cast<Eigen::Index>(nmembers.size()));
      c.neighbors.push_back(nc);
      it = c.neighbors.end() - 1;
    }
    const auto pos = std::lower_bound(nmembers.begin(), nmembers.end(), ch.neighbor) - nmembers.begin();
    const SubsystemModel& sub = subsystems[static_cast<std::size_t>(ch.member)];
    it->state.block(static_cast<Eigen::Index>(k), noffsets[static_cast<std::size_t>(pos)], 1,
                    sub.down_state_selector.cols()) = sub.down_state_selector;
    it->input(static_cast<Eigen::Index>(k), pos) = sub.down_input_selector(0, 0);
  }
  return c;
}

CoalitionModel build_global_model(const std::vector<SubsystemModel>& subsystems) {
  std::vector<int> all(subsystems.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return build_coalition_model(subsystems, all, {all});
}

std::vector<int> global_state_offsets(const std::vector<SubsystemModel>& subsystems) {
  std::vector<int> offsets;
  int n = 0;
  for (const auto& s : subsystems) {
    offsets.push_back(n);
    n += s.state_dim();
  }
  offsets.push_back(n);
  return offsets;
}

Vector gather_state(const CoalitionModel& model, const std::vector<int>& global_offsets,
                    const Vector& global_state) {
  Vector out(model.state_dim());
  for (std::size_t li = 0; li < model.members.size(); ++li) {
    const int s = model.members[li];
    const int len = global_offsets[static_cast<std::size_t>(s) + 1] - global_offsets[static_cast<std::size_t>(s)];
    out.segment(model.state_offsets[li], len) = global_state.segment(global_offsets[static_cast<std::size_t>(s)], len);
  }
  return out;
}

void scatter_state(const CoalitionModel& model, const std::vector<int>& global_offsets,
                   const Vector& local_state, Vector& global_state) {
  for (std::size_t li = 0; li < model.members.size(); ++li) {
    const int s = model.members[li];
    const int len = global_offsets[static_cast<std::size_t>(s) + 1] - global_offsets[static_cast<std::size_t>(s)];
    global_state.segment(global_offsets[static_cast<std::size_t>(s)], len) =
        local_state.segment(model.state_offsets[li], len);
  }
}

Vector steady_state(const std::vector<SubsystemModel>& subsystems, const Vector& offtakes) {
  if (offtakes.size() != static_cast<Eigen::Index>(subsystems.size())) {
    throw DimensionError("offtake vector does not match the number of reaches");
  }
  const auto offsets = global_state_offsets(subsystems);
  Vector x = Vector::Zero(offsets.back());
  double flow = 0.0;
  for (int i = static_cast<int>(subsystems.size()) - 1; i >= 0; --i) {
    flow += offtakes(i);
    const auto& s = subsystems[static_cast<std::size_t>(i)];
    x.segment(offsets[static_cast<std::size_t>(i)], s.delay).setConstant(flow);
  }
  return x;
}

}  // namespace coalmpc
