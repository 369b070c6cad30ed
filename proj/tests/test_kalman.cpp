#include <doctest.h>

#include "coalmpc/kalman.hpp"
#include "coalmpc/simulator.hpp"

using namespace coalmpc;

namespace {

std::vector<ReachParams> three_reaches() {
  return {{1, 5000.0, 2, 0, 0}, {2, 8000.0, 1, 0, 0}, {3, 3000.0, 3, 0, 0}};
}

Measurement measure(const Plant& p) { return {p.levels(), p.gate_flows()}; }

}  // namespace

TEST_SUITE("kalman") {

TEST_CASE("measurement stacks member levels then member gate flows") {
  const auto subs = build_canal(three_reaches(), 300.0);
  const CoalitionModel c = build_coalition_model(subs, {1, 2}, {{0}, {1, 2}});
  Measurement m{Vector::LinSpaced(3, 1, 3), Vector::LinSpaced(3, 10, 30)};
  const Vector y = coalition_measurement(c, m);
  REQUIRE(y.size() == 4);
  CHECK(y(0) == 2.0);
  CHECK(y(1) == 3.0);
  CHECK(y(2) == 20.0);
  CHECK(y(3) == 30.0);
  const Vector x = steady_state(subs, Vector::Constant(3, 1.0));
  const auto offsets = global_state_offsets(subs);
  const Vector local = gather_state(c, offsets, x);
  CHECK((coalition_output_matrix(c) * local).tail(2)(1) == doctest::Approx(1.0));
}

TEST_CASE("disturbance estimate converges on a constant outflow") {
  Plant plant(three_reaches(), 300.0);
  const Vector p = Vector::Constant(3, 1.5);
  plant.settle(p);
  const auto subs = plant.subsystems();
  const CoalitionModel c = build_coalition_model(subs, {0, 1}, {{0, 1}, {2}});
  KalmanSettings s;
  KalmanState kf = kf_prior(c, s, measure(plant));
  const double omega = plant.gate_flows()(2);
  double err = 1e9;
  for (int k = 0; k < 50; ++k) {
    plant.step(Vector::Zero(3), p);
    kf = kf_update(kf, c, s, Vector::Zero(2), p.head(2), measure(plant));
    err = std::abs(kf.disturbance()(0) - omega);
  }
  CHECK(err <= 1e-3);
  CHECK(kf.covariance.isApprox(kf.covariance.transpose(), 1e-12));
}

TEST_CASE("history buffer keeps the newest samples") {
  HistoryBuffer h(2);
  for (int i = 0; i < 3; ++i) h.push({{Vector::Constant(1, i), Vector::Zero(1)}, {}, {}});
  REQUIRE(h.size() == 2);
  CHECK(h[0].measurement.levels(0) == 1.0);
  CHECK(h[1].measurement.levels(0) == 2.0);
}

}
