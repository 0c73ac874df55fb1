#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "vc/core_model.hpp"
#include "vc/mpc.hpp"
#include "vc/speed_profile.hpp"

namespace vct {

/// Metro-class unit used by most fixtures.
inline vc::TrainParams metro_params() {
  vc::TrainParams p;
  p.name = "metro";
  p.mass_kg = 99972.0;
  p.length_m = 54.9;
  p.davis_a = 1216.13;
  p.davis_b = 117.39;
  p.davis_c = 2.97;
  p.tau_s = 0.7;
  p.f_traction_max = 97972.56;
  p.f_brake_max = 150000.0;
  p.p_traction_max = 1.584e6;
  p.p_brake_max = 1.584e6;
  p.brake_rate_lead = 1.25;
  p.brake_rate_self = 1.0;
  p.adhesion_mu = 0.15;
  return p;
}

inline vc::TrainParams regional_params() {
  vc::TrainParams p;
  p.name = "regional";
  p.mass_kg = 247480.0;
  p.length_m = 107.36;
  p.davis_a = 1804.5;
  p.davis_b = 68.87;
  p.davis_c = 4.91;
  p.tau_s = 0.7;
  p.f_traction_max = 242530.0;
  p.f_brake_max = 242530.0;
  p.p_traction_max = 4.0e6;
  p.p_brake_max = 4.0e6;
  p.brake_rate_lead = 1.25;
  p.brake_rate_self = 1.0;
  p.adhesion_mu = 0.1;
  return p;
}

inline vc::TrainParams highspeed_params() {
  vc::TrainParams p;
  p.name = "highspeed";
  p.mass_kg = 457400.0;
  p.length_m = 200.0;
  p.davis_a = 3383.5;
  p.davis_b = 114.55;
  p.davis_c = 7.32;
  p.tau_s = 0.7;
  p.f_traction_max = 143440.0;
  p.f_brake_max = 224126.0;
  p.p_traction_max = 8.8e6;
  p.p_brake_max = 8.8e6;
  p.brake_rate_lead = 0.625;
  p.brake_rate_self = 0.5;
  p.adhesion_mu = 0.05;
  return p;
}

/// Single-section flat line with stations at both ends.
inline vc::LineProfile flat_line(double length, double limit,
                                 std::vector<vc::Station> stations = {}) {
  vc::LineProfile line;
  line.name = "flat";
  line.length_m = length;
  line.sections.push_back({0.0, length, 0.0, 0.0, limit});
  if (stations.empty())
    line.stations = {{0.0, 0.0}, {length, 0.0}};
  else
    line.stations = std::move(stations);
  return line;
}

/// Affine toy unit: no quadratic drag, actuator lag equal to the step so the
/// force state tracks the command one step behind, force-bound only.
inline vc::TrainParams toy_params() {
  vc::TrainParams p;
  p.name = "toy";
  p.mass_kg = 1000.0;
  p.length_m = 20.0;
  p.davis_a = 100.0;
  p.davis_b = 10.0;
  p.davis_c = 0.0;
  p.tau_s = 0.2;
  p.f_traction_max = 5000.0;
  p.f_brake_max = 5000.0;
  p.p_traction_max = 1e9;
  p.p_brake_max = 1e9;
  p.brake_rate_lead = 1.0;
  p.brake_rate_self = 1.0;
  return p;
}

inline vc::ControllerConfig toy_cfg() {
  vc::ControllerConfig cfg;
  cfg.h_p = 3;
  cfg.h_c = 2;
  cfg.j_max = 10.0;
  return cfg;
}

/// Toy train on a flat 300 m line whose envelope plateaus at 15 m/s.
struct ToyWorld {
  vc::TrainParams train = toy_params();
  vc::LineProfile line = flat_line(300.0, 15.0);
  vc::ControllerConfig cfg = toy_cfg();
  vc::SpeedProfile profile;

  ToyWorld() { profile = vc::build_envelope(line, train, cfg); }

  vc::SolveContext ctx(vc::TrainState state, double prev_u) const {
    vc::SolveContext c;
    c.train = &train;
    c.line = &line;
    c.profile = &profile;
    c.cfg = &cfg;
    c.current = state;
    c.prev_input = prev_u;
    return c;
  }
};

inline std::vector<vc::TrainState> toy_rollout(const ToyWorld& w,
                                               vc::TrainState x,
                                               const std::vector<double>& u) {
  std::vector<vc::TrainState> out{x};
  for (double uk : u) {
    x = vc::euler_step(w.train, x, uk, w.line.track_at(x.s), w.cfg.t_s, true);
    out.push_back(x);
  }
  return out;
}

/// Mirror of the planner's reported cost for a leader on the toy line.
inline double toy_leader_cost(const ToyWorld& w, vc::TrainState x0,
                              double prev_u, const std::vector<double>& u) {
  const auto& cfg = w.cfg;
  const double wj = 1.0 / (w.train.mass_kg * cfg.t_s * cfg.j_max);
  auto states = toy_rollout(w, x0, u);
  double cost = (wj * (u[0] - prev_u)) * (wj * (u[0] - prev_u));
  for (size_t k = 0; k + 1 < u.size(); ++k) {
    const double j = wj * (u[k + 1] - u[k]);
    cost += j * j;
  }
  for (int k = 1; k <= cfg.h_p; ++k) {
    const double e =
        (states[k].v - w.profile.query(states[k].s)) / cfg.v_max;
    cost += e * e;
  }
  for (int k = 0; k <= cfg.h_p; ++k) {
    cost += cfg.w_eps_vmax / cfg.v_max *
            std::max(0.0, states[k].v - w.profile.query(states[k].s));
    cost += cfg.w_eps_vmin / cfg.v_max * std::max(0.0, cfg.v_min - states[k].v);
  }
  return cost;
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace vct
