// Serial reference vs OpenMP versions of the two parallel kernels:
// supervisor candidate evaluation and per-coalition controller steps.

#include <benchmark/benchmark.h>

#include "coalmpc/simulator.hpp"
#include "coalmpc/supervisor.hpp"

using namespace coalmpc;

namespace {

struct Fixture {
  std::vector<SubsystemModel> subs = build_canal(dez_reaches(), 300.0);
  Vector offtakes = Scenario::scenario1().offtakes_at(72);
  Vector state;
  PublishedSetpoints published;
  std::vector<Topology> candidates;

  Fixture() {
    const Vector before = Scenario::scenario1().offtakes_at(0);
    state = steady_state(subs, before);
    const auto offsets = global_state_offsets(subs);
    for (std::size_t i = 0; i < subs.size(); ++i) state(offsets[i + 1] - 1) = 0.05 * static_cast<double>(i % 3);
    const CoalitionModel global = build_global_model(subs);
    published = PublishedSetpoints::bootstrap(subs, global.gate_flow_selector * state);
    candidates = candidate_set(Topology::from_bit_string("010001000100"));
  }
};

template <bool Parallel, bool Cached>
void BM_Candidates(benchmark::State& st) {
  Fixture f;
  SupervisorConfig cfg;
  SynthesisCache warm(f.subs, {}, true);
  for (auto _ : st) {
    SynthesisCache cold(f.subs, {}, Cached);
    SynthesisCache& cache = Cached ? warm : cold;
    auto v = Parallel ? evaluate_candidates_parallel(f.state, f.candidates, cache, f.offtakes,
                                                     f.published, cfg)
                      : evaluate_candidates_serial(f.state, f.candidates, cache, f.offtakes,
                                                   f.published, cfg);
    benchmark::DoNotOptimize(v);
  }
}

template <bool Parallel>
void BM_CoalitionSteps(benchmark::State& st) {
  SimulationOptions opt;
  opt.parallel = Parallel;
  opt.supervisor.parallel = Parallel;
  Scenario s = Scenario::scenario1();
  s.horizon = 84;
  for (auto _ : st) {
    auto t = run_closed_loop(dez_reaches(), s, opt);
    benchmark::DoNotOptimize(t);
  }
}

}  // namespace

BENCHMARK(BM_Candidates<false, false>)->Name("candidates/serial/synthesis")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Candidates<true, false>)->Name("candidates/parallel/synthesis")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Candidates<false, true>)->Name("candidates/serial/cached")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Candidates<true, true>)->Name("candidates/parallel/cached")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CoalitionSteps<false>)->Name("closed_loop_84_steps/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CoalitionSteps<true>)->Name("closed_loop_84_steps/parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
