// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "coalmpc/kalman.hpp"
#include "coalmpc/simulator.hpp"
#include "coalmpc/supervisor.hpp"
#include "coalmpc/trace_io.hpp"
#include "oracles.hpp"

using namespace coalmpc;

namespace {

constexpr double kInputBound = 1.0 + 1e-9;
constexpr double kRunSeconds = 60.0;
constexpr double kOffsetNominal = 0.02;
constexpr double kOffsetMismatch = 0.05;
constexpr double kMismatch = 0.2;
constexpr double kCertificate = 1e-8;
constexpr double kGainMatch = 1e-8;
constexpr double kQpObjective = 1e-6;
constexpr double kQpSolution = 1e-5;
constexpr double kKalman = 1e-3;
constexpr int kKalmanSteps = 50;
constexpr int kRewarmSteps = 20;
constexpr int kDisturbanceStep = 72;
constexpr int kWindow = 10;
constexpr int kTail = 50;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct TimedRun {
  SimTrace trace;
  double seconds = 0;
};

TimedRun timed(const std::function<SimTrace()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  TimedRun r;
  r.trace = run();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double max_input(const SimTrace& t) {
  double m = 0;
  for (const auto& s : t.steps) m = std::max(m, s.inputs.cwiseAbs().maxCoeff());
  return m;
}

double tail_error(const SimTrace& t) {
  double m = 0;
  for (std::size_t k = t.size() - kTail; k < t.size(); ++k)
    m = std::max(m, t.steps[k].levels.cwiseAbs().maxCoeff());
  return m;
}

Vector peaks(const SimTrace& t) {
  Vector p = Vector::Zero(t.num_reaches);
  for (const auto& s : t.steps) p = p.cwiseMax(s.levels.cwiseAbs());
  return p;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Criteria 1-6 share the closed-loop runs.
void closed_loop_criteria() {
  const auto reaches = dez_reaches();
  const SimulationOptions nominal;
  SimulationOptions mismatch;
  mismatch.plant = PlantConfig::mismatch(13, kMismatch);
  const Scenario s1 = Scenario::scenario1();
  const Scenario s2 = Scenario::scenario2();

  const TimedRun c1 = timed([&] { return run_closed_loop(reaches, s1, nominal); });
  const TimedRun z1 = timed([&] { return run_centralized(reaches, s1, nominal); });
  const TimedRun c2 = timed([&] { return run_closed_loop(reaches, s2, nominal); });
  const TimedRun z2 = timed([&] { return run_centralized(reaches, s2, nominal); });
  const TimedRun m1 = timed([&] { return run_closed_loop(reaches, s1, mismatch); });

  {
    bool all39 = true;
    for (const auto& s : z1.trace.steps) all39 = all39 && s.input_decision_vars == 39;
    const CostReport rc = accumulate_costs(c1.trace, 0.6);
    report(1, all39 && rc.decision_vars_per_coalition < 39.0,
           fmt("centralized 39 every step: %.0f, coalitional per coalition %.2f", all39,
               rc.decision_vars_per_coalition));
  }
  {
    double worst = 0, slowest = 0;
    for (const TimedRun* r : {&c1, &z1, &c2, &z2, &m1}) {
      worst = std::max(worst, max_input(r->trace));
      slowest = std::max(slowest, r->seconds);
    }
    const bool lengths = c1.trace.size() == 288 && c2.trace.size() == 288;
    report(2, worst <= kInputBound && slowest < kRunSeconds && lengths,
           fmt("max |dq| %.12f, slowest run %.1f s", worst, slowest));
  }
  {
    const double nom = tail_error(c1.trace);
    const double mis = tail_error(m1.trace);
    report(3, nom < kOffsetNominal && mis < kOffsetMismatch,
           fmt("final-window max |e| nominal %.4f m, mismatch %.4f m", nom, mis));
  }
  {
    const auto& st = c1.trace.steps;
    int before = 0, after = 0, peak = 0;
    for (int k = kDisturbanceStep - kWindow; k < kDisturbanceStep; ++k) before += st[k].links;
    for (int k = kDisturbanceStep + 1; k <= kDisturbanceStep + kWindow; ++k) after += st[k].links;
    for (std::size_t k = kDisturbanceStep; k < st.size(); ++k) peak = std::max(peak, st[k].links);
    const std::size_t start = st.size() - kTail;
    int tail_max = 0;
    double first = 0, second = 0;
    for (std::size_t k = start; k < st.size(); ++k) {
      tail_max = std::max(tail_max, st[k].links);
      (k < start + kTail / 2 ? first : second) += st[k].links;
    }
    const bool ok = after > before && tail_max <= peak && second <= first;
    report(4, ok,
           fmt("links before/after disturbance %.0f/%.0f, ", before, after) +
               fmt("tail halves %.0f/%.0f, ", first, second) +
               fmt("tail max %.0f vs peak %.0f", tail_max, peak));
  }
  {
    const CostReport rc = accumulate_costs(c1.trace, 0.6);
    const CostReport rz = accumulate_costs(z1.trace, 0.6);
    report(5, rz.performance <= rc.performance && rc.combined < rz.combined,
           fmt("performance centralized %.1f vs coalitional %.1f; ", rz.performance,
               rc.performance) +
               fmt("combined coalitional %.1f vs centralized %.1f", rc.combined, rz.combined));
  }
  {
    const Vector pc = peaks(c1.trace);
    const Vector pz = peaks(z1.trace);
    std::string worse;
    for (int i = 0; i < 12; ++i)
      if (pz(i) > pc(i)) worse += fmt(" %.0f(%.3f>%.3f)", i + 1, pz(i), pc(i));
    report(6, worse.empty(),
           worse.empty() ? "every reach but the last" : "centralized higher at reach" + worse);
  }
}

void synthesis_certificates() {
  const auto subs = build_canal(dez_reaches(), 300.0);
  const SynthesisWeights w{250.0, 2800.0};
  std::vector<Topology> tops{Topology::empty(13), Topology::full(13)};
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> bits(1, 4094);
  while (tops.size() < 22) tops.emplace_back(13, static_cast<std::uint64_t>(bits(rng)));
  double dare = 0, lyap = 0;
  for (const auto& t : tops) {
    const GainSet g = synthesize(partition_of(t), subs, w);
    dare = std::max(dare, g.max_dare_residual());
    lyap = std::max(lyap, g.max_lyapunov_residual());
  }
  const GainSet full = synthesize(partition_of(Topology::full(13)), subs, w);
  const CoalitionModel m = build_global_model(subs);
  const Matrix q = m.level_weight(w.level_weight);
  const Matrix r = m.input_weight(w.input_weight);
  const Matrix p = oracle::dare_doubling(m.xi, m.upsilon, q, r);
  const Matrix bp = m.upsilon.transpose() * p;
  const Matrix k = -(r + bp * m.upsilon).ldlt().solve(bp * m.xi);
  const double gap = (full.k_global() - k).cwiseAbs().maxCoeff();
  report(7, dare <= kCertificate && lyap <= kCertificate && gap <= kGainMatch,
         fmt("max dare residual %.2e, max lyapunov residual %.2e, gain gap %.2e", dare, lyap,
             gap));
}

void qp_oracle() {
  std::mt19937 rng(99);
  std::normal_distribution<double> nd;
  double worst_obj = 0, worst_x = 0;
  bool statuses = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 4;
    const int m = trial % 7;
    Matrix l = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
    QpProblem p = QpProblem::unconstrained(l * l.transpose() + 0.1 * Matrix::Identity(n, n),
                                           Vector::NullaryExpr(n, [&] { return 2.0 * nd(rng); }));
    p.ineq_matrix = Matrix::NullaryExpr(m, n, [&] { return nd(rng); });
    p.ineq_rhs = Vector::NullaryExpr(m, [&] { return nd(rng); });
    const auto ref = oracle::brute_force_qp(p.hessian, p.linear, p.ineq_matrix, p.ineq_rhs);
    const QpSolution s = solve_qp(p);
    if (!ref) {
      statuses = statuses && s.status == QpStatus::kInfeasible;
      continue;
    }
    statuses = statuses && s.status == QpStatus::kOptimal;
    worst_obj = std::max(worst_obj, std::abs(s.objective - ref->objective));
    worst_x = std::max(worst_x, (s.x - ref->x).cwiseAbs().maxCoeff());
  }
  report(8, statuses && worst_obj <= kQpObjective && worst_x <= kQpSolution,
         fmt("statuses agree %.0f, max objective gap %.2e, max solution gap %.2e", statuses,
             worst_obj, worst_x));
}

void partition_oracle() {
  int mismatches = 0;
  for (unsigned long long mask = 0; mask < 4096; ++mask)
    if (partition_of(Topology(13, mask)).blocks != oracle::chain_components(13, mask)) ++mismatches;
  report(9, mismatches == 0, fmt("%.0f of 4096 topologies disagree", mismatches));
}

void link_price_sweep() {
  const auto subs = build_canal(dez_reaches(), 300.0);
  const Vector offtakes = Scenario::scenario1().initial_offtakes;
  const auto offsets = global_state_offsets(subs);
  const double pattern[] = {0.1, -0.2, 0.3, 0.5, -0.1, 0.2, 0.4, -0.3, 0.6, 0.2, -0.4, 0.1, 0.3};
  SynthesisCache cache(subs, {250.0, 2800.0});
  std::string counts;
  bool monotone = true;
  for (double magnitude : {0.05, 1.0}) {
    Vector state = steady_state(subs, offtakes);
    Vector gate(13);
    for (int i = 0; i < 13; ++i) {
      state(offsets[i] + subs[i].level_row()) = magnitude * pattern[i];
      gate(i) = state(offsets[i]);
    }
    const PublishedSetpoints published = PublishedSetpoints::bootstrap(subs, gate);
    for (const char* incumbent : {"000000000000", "101010101010", "111111111111"}) {
      int previous = 13;
      counts += " [";
      bool first = true;
      for (double cl : {0.0, 0.15, 0.3, 0.6, 1.2, 2.4}) {
        SupervisorConfig cfg;
        cfg.link_cost = cl;
        const Selection s = select_topology(state, Topology::from_bit_string(incumbent), cache,
                                            offtakes, published, cfg);
        monotone = monotone && s.topology.link_count() <= previous;
        previous = s.topology.link_count();
        counts += (first ? "" : " ") + std::to_string(previous);
        first = false;
      }
      counts += "]";
    }
  }
  report(10, monotone, "selected link counts per sweep:" + counts);
}

void kalman_convergence() {
  const std::vector<ReachParams> reaches{
      {1, 5000.0, 2, 0, 0}, {2, 8000.0, 1, 0, 0}, {3, 3000.0, 3, 0, 0}};
  Plant plant(reaches, 300.0);
  const Vector p = Vector::Constant(3, 1.5);
  plant.settle(p);
  const auto& subs = plant.subsystems();
  const KalmanSettings settings;
  auto measure = [&] { return Measurement{plant.levels(), plant.gate_flows()}; };

  // Cold filter on reaches 1-2: the outflow through gate 3 is unknown at first.
  const CoalitionModel pair = build_coalition_model(subs, {0, 1}, {{0, 1}, {2}});
  HistoryBuffer history(20);
  KalmanState kf = kf_prior(pair, settings, measure());
  kf.estimate.tail(pair.channel_dim()).setZero();
  double first = 1e9;
  for (int k = 0; k < kKalmanSteps; ++k) {
    // Gate 2 lowers its flow a few samples before the switch, then holds.
    Vector dq = Vector::Zero(3);
    if (k >= kKalmanSteps - 8 && k < kKalmanSteps - 5) dq(1) = -0.5;
    history.push({measure(), dq, p});
    plant.step(dq, p);
    kf = kf_update(kf, pair, settings, dq.head(2), p.head(2), measure());
    first = std::abs(kf.disturbance()(0) - plant.gate_flows()(2));
  }

  // Forced switch: reach 1 alone, now driven by the flow through gate 2.
  const CoalitionModel single = build_coalition_model(subs, {0}, {{0}, {1, 2}});
  KalmanState kf2 = kf_init(single, settings, history, measure());
  double second = 1e9;
  for (int k = 0; k < kRewarmSteps; ++k) {
    plant.step(Vector::Zero(3), p);
    kf2 = kf_update(kf2, single, settings, Vector::Zero(1), p.head(1), measure());
    second = std::abs(kf2.disturbance()(0) - plant.gate_flows()(1));
  }
  report(11, first <= kKalman && second <= kKalman,
         fmt("|w_hat - w| after %.0f steps %.2e, ", kKalmanSteps, first) +
             fmt("%.0f steps after the switch %.2e", kRewarmSteps, second));
}

void determinism() {
  Scenario s = Scenario::scenario2();
  s.horizon = 160;
  SimulationOptions o;
  o.seed = 17;
  o.plant.level_noise_std = 0.005;
  const auto dir = std::filesystem::temp_directory_path() / "coalmpc_acceptance";
  std::filesystem::create_directories(dir);
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  const SimTrace ta = run_closed_loop(dez_reaches(), s, o);
  const SimTrace tb = run_closed_loop(dez_reaches(), s, o);
  write_trace(ta, a, "0000000000000000");
  write_trace(tb, b, "0000000000000000");
  const bool same = file_bytes(a) == file_bytes(b);
  const bool round_trip = read_trace(a).trace.steps == ta.steps;
  report(12, same && round_trip,
         fmt("identical trace files %.0f, lossless round trip %.0f", same, round_trip));
}

}  // namespace

int main() {
  try {
    closed_loop_criteria();
    synthesis_certificates();
    qp_oracle();
    partition_oracle();
    link_price_sweep();
    kalman_convergence();
    determinism();
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 2;
  }
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
