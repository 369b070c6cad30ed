#include <doctest.h>

#include <omp.h>

#include <random>

#include "coalmpc/simulator.hpp"
#include "coalmpc/supervisor.hpp"
#include "oracles.hpp"

using namespace coalmpc;

namespace {

struct Disturbed {
  std::vector<SubsystemModel> subs = build_canal(dez_reaches(), 300.0);
  Vector offtakes = Scenario::scenario1().initial_offtakes;
  Vector state;
  PublishedSetpoints published;

  Disturbed() {
    state = steady_state(subs, offtakes);
    const auto offsets = global_state_offsets(subs);
    const double levels[] = {0.1, -0.2, 0.3, 0.5, -0.1, 0.2, 0.4, -0.3, 0.6, 0.2, -0.4, 0.1, 0.3};
    for (int i = 0; i < 13; ++i) state(offsets[i] + subs[i].level_row()) = levels[i];
    Vector gate(13);
    for (int i = 0; i < 13; ++i) gate(i) = state(offsets[i]);
    published = PublishedSetpoints::bootstrap(subs, gate);
  }
};

}  // namespace

TEST_SUITE("supervisor") {

TEST_CASE("full partition gain equals the centralized lqr gain") {
  const auto subs = build_canal(dez_reaches(), 300.0);
  const GainSet g = synthesize(partition_of(Topology::full(13)), subs, {250.0, 2800.0});
  const CoalitionModel m = build_global_model(subs);
  const Matrix q = m.level_weight(250.0);
  const Matrix r = m.input_weight(2800.0);
  const Matrix p = oracle::dare_doubling(m.xi, m.upsilon, q, r);
  const Matrix bp = m.upsilon.transpose() * p;
  const Matrix k = -(r + bp * m.upsilon).ldlt().solve(bp * m.xi);
  CHECK((g.k_global() - k).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + k.cwiseAbs().maxCoeff()));
  CHECK(g.max_dare_residual() <= 1e-8);
  CHECK(g.max_lyapunov_residual() <= 1e-8);
}

TEST_CASE("cache returns the same gains as direct synthesis and counts hits") {
  const auto subs = build_canal(dez_reaches(), 300.0);
  SynthesisCache cache(subs, {250.0, 2800.0});
  const Partition part = partition_of(Topology::from_bit_string("110011000111"));
  const auto a = cache.get(part);
  const auto b = cache.get(part);
  CHECK(a == b);
  CHECK(cache.hits() >= 1);
  const GainSet direct = synthesize(part, subs, {250.0, 2800.0});
  CHECK((a->k_global() - direct.k_global()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parallel candidate evaluation equals the serial one") {
  omp_set_num_threads(4);
  Disturbed d;
  SynthesisCache c1(d.subs, {250.0, 2800.0});
  SynthesisCache c2(d.subs, {250.0, 2800.0}, false);
  const auto cands = candidate_set(Topology::from_bit_string("101010101010"));
  const SupervisorConfig cfg;
  const auto s = evaluate_candidates_serial(d.state, cands, c1, d.offtakes, d.published, cfg);
  const auto p = evaluate_candidates_parallel(d.state, cands, c2, d.offtakes, d.published, cfg);
  REQUIRE(s.size() == p.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].topology == p[i].topology);
    CHECK(s[i].performance == p[i].performance);
    CHECK(s[i].network == p[i].network);
  }
}

TEST_CASE("ties go to fewer links then to the smaller bit string") {
  std::vector<CandidateValue> v(3);
  v[0].topology = Topology::from_bit_string("110000000000");
  v[1].topology = Topology::from_bit_string("010000000000");
  v[2].topology = Topology::from_bit_string("100000000000");
  for (auto& c : v) c.performance = 1.0;
  CHECK(argmin_candidate(v) == 1);
}

TEST_CASE("selected link count does not grow with the link price") {
  Disturbed d;
  SynthesisCache cache(d.subs, {250.0, 2800.0});
  int previous = 13;
  for (double cl : {0.0, 0.15, 0.3, 0.6, 1.2, 2.4}) {
    SupervisorConfig cfg;
    cfg.link_cost = cl;
    const Selection s =
        select_topology(d.state, Topology::full(13), cache, d.offtakes, d.published, cfg);
    CHECK(s.topology.link_count() <= previous);
    previous = s.topology.link_count();
  }
}

TEST_CASE("at equilibrium a priced link is shed") {
  Disturbed d;
  d.state = steady_state(d.subs, d.offtakes);
  SynthesisCache cache(d.subs, {250.0, 2800.0});
  const Selection s = select_topology(d.state, Topology::full(13), cache, d.offtakes,
                                      d.published, SupervisorConfig{});
  CHECK(s.topology.link_count() == 11);
}

}
