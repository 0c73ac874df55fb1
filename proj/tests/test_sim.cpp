#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "vc/sim.hpp"

using namespace vc;
using doctest::Approx;

namespace {

ScenarioConfig toy_scenario(int n_trains, int iterations) {
  ScenarioConfig sc;
  sc.name = "toy";
  sc.line = vct::flat_line(300.0, 15.0);
  sc.cfg = vct::toy_cfg();
  for (int i = 0; i < n_trains; ++i) {
    ScenarioTrain t;
    t.name = i == 0 ? "lead" : "fol" + std::to_string(i);
    t.params = vct::toy_params();
    t.kind = i == 0 ? ControllerKind::Classical : ControllerKind::Learning;
    sc.trains.push_back(t);
  }
  sc.iterations = iterations;
  return sc;
}

/// One two-train run with learning on the follower, shared by the
/// read-only cases below.
const ScenarioResult& shared_run() {
  static const ScenarioResult r = run_scenario(toy_scenario(2, 2));
  return r;
}

}  // namespace

TEST_CASE("initial placement stacks the convoy by length plus target gap") {
  ScenarioConfig sc;
  sc.line = vct::flat_line(2000.0, 19.4);
  sc.trains.resize(2);
  sc.trains[0].params = vct::metro_params();
  sc.trains[1].params = vct::metro_params();
  const auto states = initial_placement(sc);
  REQUIRE(states.size() == 2);
  CHECK(states[0].s == 0.0);
  CHECK(states[0].v == 0.0);
  CHECK(states[0].f == 0.0);
  CHECK(states[1].s == Approx(-64.9).epsilon(1e-12));
  CHECK(states[1].v == 0.0);

  const double d = gap_distance(states[0].s, states[1].s,
                                sc.trains[0].params.length_m);
  CHECK(d == Approx(sc.cfg.d_des).epsilon(1e-12));
  // both at rest, the braking correction vanishes
  const double d_rel =
      relative_braking_distance(sc.trains[1].params, d, 0.0, 0.0);
  CHECK(d_rel == Approx(sc.cfg.d_des).epsilon(1e-12));

  SUBCASE("single train sits alone at the origin") {
    sc.trains.resize(1);
    const auto solo = initial_placement(sc);
    REQUIRE(solo.size() == 1);
    CHECK(solo[0].s == 0.0);
  }
}

TEST_CASE("dwell holds the convoy at rest until the budget runs out") {
  ScenarioConfig sc = toy_scenario(2, 0);
  sc.line = vct::flat_line(300.0, 15.0, {{0.0, 2.0}, {300.0, 0.0}});
  std::vector<SpeedProfile> profiles;
  for (const auto& t : sc.trains)
    profiles.push_back(build_envelope(sc.line, t.params, sc.cfg));
  ConvoySimulator sim(sc, profiles, {nullptr, nullptr});

  const auto placed = initial_placement(sc);
  for (int k = 0; k < 10; ++k) {
    const StepRecord rec = sim.step();
    for (size_t n = 0; n < 2; ++n) {
      CHECK(std::abs(rec.diags[n].u) <= 1e-6);
      CHECK(rec.states[n].v == 0.0);
      CHECK(rec.states[n].s == placed[n].s);
    }
  }
  for (int k = 0; k < 5; ++k) sim.step();
  CHECK(sim.states()[0].v > 0.0);
  CHECK(sim.states()[0].s > 0.0);
}

TEST_CASE("leader trajectory is untouched by the train behind it") {
  const ScenarioResult solo = run_scenario(toy_scenario(1, 0));
  const ScenarioResult duo = run_scenario(toy_scenario(2, 0));
  const auto& a = solo.iterations[0];
  const auto& b = duo.iterations[0];
  REQUIRE(a.completed);
  REQUIRE(b.completed);
  REQUIRE(b.steps.size() >= a.steps.size());
  for (size_t k = 0; k < a.steps.size(); ++k) {
    CHECK(b.steps[k].states[0].s == a.steps[k].states[0].s);
    CHECK(b.steps[k].states[0].v == a.steps[k].states[0].v);
    CHECK(b.steps[k].states[0].f == a.steps[k].states[0].f);
    CHECK(b.steps[k].diags[0].u == a.steps[k].diags[0].u);
  }
  // past the solo run's horizon the leader is parked at the terminus
  for (size_t k = a.steps.size(); k < b.steps.size(); ++k)
    CHECK(b.steps[k].states[0].v < 0.01);
}

TEST_CASE("iteration counting, recording, and assignment") {
  const ScenarioResult& r = shared_run();
  REQUIRE(r.iterations.size() == 3);
  REQUIRE(r.safe_sets.size() == 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.iterations[i].iteration_id == i);
    CHECK(r.iterations[i].completed);
    CHECK(r.iterations[i].simulated_s ==
          Approx(r.iterations[i].steps.size() * 0.2).epsilon(1e-12));
    for (int n = 0; n < 2; ++n)
      CHECK(r.iterations[i].stage_costs[n].size() == r.iterations[i].steps.size());
  }
  CHECK(r.safe_sets[0].iterations.size() == 3);
  CHECK(r.safe_sets[1].iterations.size() == 3);

  // bootstrap runs everyone classical; afterwards only the follower learns
  for (const auto& st : r.iterations[0].steps) {
    CHECK(st.diags[0].lambda_sum == 0.0);
    CHECK(st.diags[1].lambda_sum == 0.0);
  }
  for (int i = 1; i < 3; ++i) {
    bool follower_learned = false;
    for (const auto& st : r.iterations[i].steps) {
      CHECK(st.diags[0].lambda_sum == 0.0);
      if (st.diags[1].lambda_sum != 0.0) follower_learned = true;
    }
    CHECK(follower_learned);
  }
}

TEST_CASE("learned weights satisfy the simplex contract on every step") {
  const ScenarioResult& r = shared_run();
  for (int i = 1; i < 3; ++i) {
    for (const auto& st : r.iterations[i].steps) {
      const auto& dg = st.diags[1];
      if (dg.lambda_sum == 0.0 && dg.lambda_min == 0.0) continue;
      CHECK(dg.lambda_min >= -1e-8);
      CHECK(std::abs(dg.lambda_sum - 1.0) <= 1e-8);
      CHECK(dg.vterm_mix_gap <= 1e-6);
    }
  }
}

TEST_CASE("classical leader retraces itself across learning iterations") {
  const ScenarioResult& r = shared_run();
  const auto& base = r.iterations[0];
  for (int i = 1; i < 3; ++i) {
    const auto& it = r.iterations[i];
    REQUIRE(it.steps.size() == base.steps.size());
    for (size_t k = 0; k < base.steps.size(); ++k) {
      CHECK(std::abs(it.steps[k].states[0].s - base.steps[k].states[0].s) <= 1e-9);
      CHECK(std::abs(it.steps[k].states[0].v - base.steps[k].states[0].v) <= 1e-9);
      CHECK(std::abs(it.steps[k].diags[0].u - base.steps[k].diags[0].u) <= 1e-9);
    }
  }
}

TEST_CASE("gaps stay open and the convoy stops together") {
  const ScenarioResult& r = shared_run();
  const double slot_lead = 300.0;
  const double slot_fol = 300.0 - 20.0 - 10.0;
  for (const auto& it : r.iterations) {
    for (const auto& st : it.steps) CHECK(st.d[1] > 0.0);

    double stop_lead = -1, stop_fol = -1;
    for (const auto& st : it.steps) {
      if (stop_lead < 0 && st.states[0].v < 0.01 &&
          std::abs(st.states[0].s - slot_lead) <= 5.0)
        stop_lead = st.t;
      if (stop_fol < 0 && st.states[1].v < 0.01 &&
          std::abs(st.states[1].s - slot_fol) <= 5.0)
        stop_fol = st.t;
    }
    REQUIRE(stop_lead >= 0);
    REQUIRE(stop_fol >= 0);
    CHECK(std::abs(stop_lead - stop_fol) <= 10.0);
  }
}

TEST_CASE("applied commands follow the previous step's announced intent") {
  const ScenarioResult& r = shared_run();
  const double tol = 0.05 * vct::toy_params().f_traction_max;
  const auto& it = r.iterations[0];
  for (size_t k = 0; k + 1 < it.steps.size(); ++k)
    for (int n = 0; n < 2; ++n)
      CHECK(std::abs(it.steps[k + 1].diags[n].u - it.steps[k].diags[n].u_next) <=
            tol);
}

TEST_CASE("identical scenarios replay bitwise") {
  const ScenarioConfig sc = toy_scenario(2, 1);
  const ScenarioResult a = run_scenario(sc);
  const ScenarioResult b = run_scenario(sc);
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (size_t i = 0; i < a.iterations.size(); ++i) {
    const auto& x = a.iterations[i];
    const auto& y = b.iterations[i];
    REQUIRE(x.steps.size() == y.steps.size());
    for (size_t k = 0; k < x.steps.size(); ++k) {
      for (int n = 0; n < 2; ++n) {
        CHECK(x.steps[k].states[n].s == y.steps[k].states[n].s);
        CHECK(x.steps[k].states[n].v == y.steps[k].states[n].v);
        CHECK(x.steps[k].states[n].f == y.steps[k].states[n].f);
        CHECK(x.steps[k].diags[n].u == y.steps[k].diags[n].u);
        CHECK(x.steps[k].diags[n].u_next == y.steps[k].diags[n].u_next);
        CHECK(x.steps[k].diags[n].policy_cost == y.steps[k].diags[n].policy_cost);
        CHECK(x.steps[k].diags[n].learning_cost ==
              y.steps[k].diags[n].learning_cost);
      }
      CHECK(x.steps[k].d[1] == y.steps[k].d[1]);
      CHECK(x.steps[k].d_rel[1] == y.steps[k].d_rel[1]);
    }
    for (int n = 0; n < 2; ++n)
      CHECK(x.stage_costs[n] == y.stage_costs[n]);
  }
}

TEST_CASE("a follower with a dead brake actuator collides and is not recorded") {
  ScenarioConfig sc = toy_scenario(2, 0);
  sc.line = vct::flat_line(80.0, 15.0);
  sc.trains[1].params.f_brake_max = 50.0;  // actuator far below the model's rate
  const ScenarioResult r = run_scenario(sc);
  REQUIRE(r.iterations.size() == 1);
  CHECK_FALSE(r.iterations[0].completed);
  CHECK(r.safe_sets[0].iterations.empty());
  CHECK(r.safe_sets[1].iterations.empty());
}

TEST_CASE("a train that cannot move trips the step cap") {
  ScenarioConfig sc = toy_scenario(1, 0);
  sc.line = vct::flat_line(100.0, 15.0);
  sc.trains[0].params.f_traction_max = 90.0;  // below standstill resistance
  CHECK_THROWS_AS(run_scenario(sc), NonTermination);
}

TEST_CASE("scenario validation") {
  ScenarioConfig empty;
  empty.line = vct::flat_line(100.0, 15.0);
  CHECK_THROWS_AS(empty.validate(), ValidationError);

  ScenarioConfig neg = toy_scenario(1, 0);
  neg.iterations = -1;
  CHECK_THROWS_AS(neg.validate(), ValidationError);
}
