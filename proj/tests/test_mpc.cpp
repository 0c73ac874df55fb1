#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "vc/mpc.hpp"
#include "vc/speed_profile.hpp"

using namespace vc;
using doctest::Approx;

using vct::ToyWorld;
using vct::toy_leader_cost;
using vct::toy_rollout;

TEST_CASE("linearization is exact for a drag-linear train") {
  const ToyWorld w;
  const TrainState x0{50.0, 5.0, 2000.0};
  const std::vector<double> u{1500.0, 1200.0, 1200.0, 1200.0};
  const auto ref = toy_rollout(w, x0, u);
  const Linearization lin =
      linearize_dynamics(w.train, w.line, ref, u, w.cfg.t_s);

  Eigen::Vector3d x(x0.s, x0.v, x0.f);
  for (int k = 0; k <= w.cfg.h_p; ++k) {
    x = lin.a[k] * x + lin.b[k] * u[k] + lin.g[k];
    CHECK(x[0] == Approx(ref[k + 1].s).epsilon(1e-12));
    CHECK(x[1] == Approx(ref[k + 1].v).epsilon(1e-12));
    CHECK(x[2] == Approx(ref[k + 1].f).epsilon(1e-12));
  }
}

TEST_CASE("drag tangent touches the true curve at the reference") {
  const TrainParams p = vct::metro_params();
  const LineProfile line = vct::flat_line(1000.0, 25.0);
  std::vector<TrainState> ref{{100.0, 10.0, 0.0}};
  const std::vector<double> u{0.0, 0.0};
  for (double uk : u)
    ref.push_back(
        euler_step(p, ref.back(), uk, line.track_at(ref.back().s), 0.2, true));
  const Linearization lin = linearize_dynamics(p, line, ref, u, 0.2);

  auto lin_resistance = [&](int k, double v) {
    // Recover the implied resistance from the affine speed update with f = 0.
    const double v_next =
        lin.a[k](1, 1) * v + lin.a[k](1, 2) * ref[k].f + lin.g[k][1];
    return (v - v_next) * p.mass_kg / 0.2;
  };
  CHECK(lin_resistance(0, 10.0) ==
        Approx(total_resistance(p, 10.0, 0.0, 0.0)).epsilon(1e-12));
  CHECK(lin_resistance(0, 11.0) == Approx(2863.82).epsilon(1e-9));
  CHECK(total_resistance(p, 11.0, 0.0, 0.0) == Approx(2866.79).epsilon(1e-9));
  CHECK(total_resistance(p, 11.0, 0.0, 0.0) - lin_resistance(0, 11.0) ==
        Approx(p.davis_c * 1.0).epsilon(1e-9));
}

TEST_CASE("power rows degenerate at standstill and cap at the tangent") {
  const TrainParams reg = vct::regional_params();
  CHECK_FALSE(linearize_power(reg, 0.0, 0.0).active);
  CHECK_FALSE(linearize_power(reg, 0.49, 5e4).active);

  const PowerRow row = linearize_power(reg, 40.0, 1e5);
  REQUIRE(row.active);
  // Expansion u_ref*v + v_ref*u - u_ref*v_ref reproduces the product at the
  // reference point.
  CHECK(row.c_u * 1e5 + row.c_v * 40.0 - 1e5 * 40.0 == Approx(1e5 * 40.0));
  // At v = 40 the traction side caps u at exactly P/v.
  const double u_cap = (row.rhs_hi - row.c_v * 40.0) / row.c_u;
  CHECK(u_cap == Approx(4e6 / 40.0).epsilon(1e-12));
}

TEST_CASE("leader at rest at the terminus stays at rest") {
  const ToyWorld w;
  const SolveContext c = w.ctx({300.0, 0.0, 0.0}, 0.0);
  const HorizonDecision dec = plan(c);
  for (double uk : dec.u) CHECK(std::abs(uk) <= 1e-6);
  CHECK(dec.policy_cost <= 1e-9);
  CHECK_FALSE(dec.degraded);
}

TEST_CASE("follower resting at the target gap stays at rest") {
  const ToyWorld w;
  PlannedTrajectory pre;
  pre.t_s = w.cfg.t_s;
  pre.s.assign(w.cfg.h_p + 2, 150.0);
  pre.v.assign(w.cfg.h_p + 2, 0.0);
  SolveContext c = w.ctx({150.0 - w.train.length_m - w.cfg.d_des, 0.0, 0.0}, 0.0);
  c.role = MpcRole::Follower;
  c.preceding = &pre;
  c.preceding_length = w.train.length_m;
  const HorizonDecision dec = plan(c);
  for (double uk : dec.u) CHECK(std::abs(uk) <= 1e-6);
  CHECK(dec.policy_cost <= 1e-9);
  for (double e : dec.slacks.eps_drel) CHECK(e <= 1e-8);
  CHECK(dec.slacks.eps_d <= 1e-8);
}

TEST_CASE("toy horizon matches an exhaustive grid search") {
  const ToyWorld w;
  const TrainState x0{50.0, 5.0, 2000.0};
  const double prev_u = 1000.0;
  SolveContext c = w.ctx(x0, prev_u);
  const HorizonDecision dec = plan(c);
  REQUIRE(dec.u.size() == 4);
  CHECK(dec.u[1] == dec.u[2]);
  CHECK(dec.u[2] == dec.u[3]);

  const double step_lim = w.train.mass_kg * w.cfg.t_s * w.cfg.j_max;
  auto clampu = [&](double v) {
    return std::clamp(v, -w.train.f_brake_max, w.train.f_traction_max);
  };
  double best = 1e300, best0 = 0, best1 = 0;
  auto scan = [&](double c0, double c1, double half, double step) {
    for (double u0 = clampu(std::max(c0 - half, prev_u - step_lim));
         u0 <= clampu(std::min(c0 + half, prev_u + step_lim)); u0 += step) {
      for (double u1 = clampu(std::max(c1 - half, u0 - step_lim));
           u1 <= clampu(std::min(c1 + half, u0 + step_lim)); u1 += step) {
        const double cost = toy_leader_cost(w, x0, prev_u, {u0, u1, u1, u1});
        if (cost < best) {
          best = cost;
          best0 = u0;
          best1 = u1;
        }
      }
    }
  };
  scan(prev_u, prev_u, 1e9, 40.0);
  scan(best0, best1, 60.0, 1.0);
  scan(best0, best1, 2.0, 0.05);

  CHECK(std::abs(dec.policy_cost - best) <= 1e-3);
  CHECK(dec.policy_cost <= best + 1e-3);
}

TEST_CASE("a second pass is a no-op when the model is already affine") {
  const ToyWorld w;
  const TrainState x0{50.0, 5.0, 2000.0};
  ControllerConfig one = w.cfg;
  one.sqp_max_passes = 1;
  ControllerConfig three = w.cfg;
  three.sqp_max_passes = 3;
  three.sqp_step_tol = 1e-12;  // force all passes to run

  SolveContext ca = w.ctx(x0, 1000.0);
  ca.cfg = &one;
  SolveContext cb = w.ctx(x0, 1000.0);
  cb.cfg = &three;
  const HorizonDecision a = plan(ca);
  const HorizonDecision b = plan(cb);
  for (size_t k = 0; k < a.u.size(); ++k)
    CHECK(std::abs(a.u[k] - b.u[k]) <= 1e-6);
}

TEST_CASE("leader below the plateau accelerates monotonically") {
  const ToyWorld w;
  const SolveContext c = w.ctx({50.0, 5.0, 2000.0}, 2000.0);
  const HorizonDecision dec = plan(c);
  for (size_t k = 0; k + 1 < dec.states.size(); ++k)
    CHECK(dec.states[k + 1].v > dec.states[k].v);
}

TEST_CASE("hard command invariants hold on a stressed solve") {
  const TrainParams p = vct::metro_params();
  LineProfile line;
  line.name = "stress";
  line.length_m = 1200.0;
  line.sections = {{0.0, 400.0, 0.02, 0.0, 19.4},
                   {400.0, 800.0, -0.025, 0.002, 25.0},
                   {800.0, 1200.0, 0.0, 0.0, 22.2}};
  line.stations = {{0.0, 0.0}, {600.0, 20.0}, {1200.0, 0.0}};
  line.validate();
  ControllerConfig cfg;
  const SpeedProfile prof = build_envelope(line, p, cfg);

  vct::Rng rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    SolveContext c;
    c.train = &p;
    c.line = &line;
    c.profile = &prof;
    c.cfg = &cfg;
    c.current = {vct::uniform(rng, 0.0, 1100.0), vct::uniform(rng, 0.0, 18.0),
                 vct::uniform(rng, -3e4, 6e4)};
    c.prev_input = vct::uniform(rng, -5e4, 7e4);
    const HorizonDecision dec = plan(c);

    REQUIRE(dec.u.size() == static_cast<size_t>(cfg.h_p + 1));
    REQUIRE(dec.states.size() == static_cast<size_t>(cfg.h_p + 2));
    const double jstep = p.mass_kg * cfg.t_s * cfg.j_max;
    double prev = c.prev_input;
    for (size_t k = 0; k < dec.u.size(); ++k) {
      CHECK(dec.u[k] <= p.f_traction_max);
      CHECK(dec.u[k] >= -p.f_brake_max);
      CHECK(std::abs(dec.u[k] - prev) <= jstep * (1.0 + 1e-9));
      prev = dec.u[k];
      if (k >= static_cast<size_t>(cfg.h_c)) CHECK(dec.u[k] == dec.u[cfg.h_c - 1]);
    }
    for (double e : dec.slacks.eps_vmax) CHECK(e >= 0.0);
    for (double e : dec.slacks.eps_vmin) CHECK(e >= 0.0);
    for (const auto& st : dec.states) CHECK(st.v >= 0.0);

    const PlannedTrajectory pub = published_plan(dec, cfg.t_s);
    REQUIRE(pub.s.size() == static_cast<size_t>(cfg.h_p + 2));
    REQUIRE(pub.v.size() == static_cast<size_t>(cfg.h_p + 2));
    for (size_t k = 0; k < pub.s.size(); ++k) {
      CHECK(pub.s[k] == dec.states[k].s);
      CHECK(pub.v[k] == dec.states[k].v);
    }
  }
}

TEST_CASE("slacks stay at zero when nothing binds") {
  const ToyWorld w;
  const SolveContext c = w.ctx({50.0, 5.0, 2000.0}, 2000.0);
  const HorizonDecision dec = plan(c);
  for (double e : dec.slacks.eps_vmax) CHECK(e <= 1e-8);
  for (double e : dec.slacks.eps_vmin) CHECK(e <= 1e-8);
}

TEST_CASE("follower slack matches the braking-margin shortfall") {
  const TrainParams p = vct::metro_params();
  const LineProfile line = vct::flat_line(2000.0, 25.0);
  ControllerConfig cfg;
  const SpeedProfile prof = build_envelope(line, p, cfg);

  // Preceding plan brakes hard from 12 m/s at the lead rate.
  PlannedTrajectory pre;
  pre.t_s = cfg.t_s;
  double sp = 800.0, vp = 12.0;
  for (int k = 0; k <= cfg.h_p + 1; ++k) {
    pre.s.push_back(sp);
    pre.v.push_back(vp);
    sp += vp * cfg.t_s;
    vp = std::max(0.0, vp - p.brake_rate_lead * cfg.t_s);
  }

  SolveContext c;
  c.train = &p;
  c.line = &line;
  c.profile = &prof;
  c.cfg = &cfg;
  c.role = MpcRole::Follower;
  c.preceding = &pre;
  c.preceding_length = p.length_m;
  c.current = {800.0 - p.length_m - 15.0, 12.0, 0.0};
  c.prev_input = 0.0;
  const HorizonDecision dec = plan(c);

  for (int k = 0; k <= cfg.h_p + 1; ++k) {
    const double d = gap_distance(pre.s[k], dec.states[k].s, p.length_m);
    const double drel = relative_braking_distance(p, d, pre.v[k], dec.states[k].v);
    CHECK(drel >= cfg.d_des - dec.slacks.eps_drel[k] - 0.5);
  }
}

TEST_CASE("power product stays within tolerance after the solve") {
  const TrainParams reg = vct::regional_params();
  const LineProfile line = vct::flat_line(5000.0, 55.6);
  ControllerConfig cfg;
  cfg.v_max = 69.4;
  const SpeedProfile prof = build_envelope(line, reg, cfg, 5.0);

  SolveContext c;
  c.train = &reg;
  c.line = &line;
  c.profile = &prof;
  c.cfg = &cfg;
  c.current = {1000.0, 35.0, reg.p_traction_max / 35.0};
  c.prev_input = reg.p_traction_max / 35.0;
  const HorizonDecision dec = plan(c);
  for (int k = 0; k <= cfg.h_p; ++k) {
    const double product = std::abs(dec.u[k] * dec.states[k].v);
    CHECK(product <= 1.05 * std::max(reg.p_traction_max, reg.p_brake_max));
  }
}

TEST_CASE("context validation") {
  const ToyWorld w;
  SUBCASE("follower without a preceding plan") {
    SolveContext c = w.ctx({10.0, 1.0, 0.0}, 0.0);
    c.role = MpcRole::Follower;
    CHECK_THROWS_AS(plan(c), ValidationError);
  }
  SUBCASE("missing pieces") {
    SolveContext c;
    CHECK_THROWS_AS(plan(c), ValidationError);
  }
  SUBCASE("command history outside the feasible band") {
    SolveContext c = w.ctx({50.0, 5.0, 0.0}, w.train.f_traction_max +
                                                 6.0 * w.train.mass_kg *
                                                     w.cfg.t_s * w.cfg.j_max);
    CHECK_THROWS_AS(plan(c), SolverFailure);
  }
}
