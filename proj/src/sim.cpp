#include "vc/sim.hpp"

#include <chrono>
#include <cmath>

#include "vc/metrics.hpp"

namespace vc {

void ScenarioConfig::validate() const {
  if (trains.empty()) throw ValidationError("scenario: no trains");
  if (iterations < 0) throw ValidationError("scenario: negative iteration count");
  line.validate();
  for (const auto& t : trains) t.params.validate();
  cfg.validate();
}

std::vector<TrainState> initial_placement(const ScenarioConfig& sc) {
  std::vector<TrainState> states(sc.trains.size());
  states[0] = {0, 0, 0};
  for (size_t n = 1; n < sc.trains.size(); ++n) {
    states[n].s = states[n - 1].s - sc.trains[n - 1].params.length_m - sc.cfg.d_des;
    states[n].v = 0;
    states[n].f = 0;
  }
  return states;
}

ConvoySimulator::ConvoySimulator(const ScenarioConfig& sc,
                                 const std::vector<SpeedProfile>& profiles,
                                 const std::vector<const SafeSet*>& safe_sets)
    : sc_(sc),
      profiles_(profiles),
      sets_(safe_sets),
      states_(initial_placement(sc)),
      prev_u_(sc.trains.size(), 0.0),
      prev_dec_(sc.trains.size()),
      shifted_(sc.trains.size()) {
  dwell_steps_left_.reserve(sc.line.stations.size());
  for (const auto& st : sc.line.stations)
    dwell_steps_left_.push_back(
        static_cast<int>(std::ceil(st.dwell_s / sc.cfg.t_s - 1e-9)));
  final_station_ = sc.line.stations.back().position_m;
}

StepRecord ConvoySimulator::step() {
  const size_t n_trains = sc_.trains.size();
  const double t_s = sc_.cfg.t_s;
  StepRecord rec;
  rec.t = time_;
  rec.states = states_;
  rec.diags.resize(n_trains);
  rec.d.assign(n_trains, 0.0);
  rec.d_rel.assign(n_trains, 0.0);

  for (size_t n = 1; n < n_trains; ++n) {
    const auto& own = sc_.trains[n].params;
    rec.d[n] = gap_distance(states_[n - 1].s, states_[n].s,
                            sc_.trains[n - 1].params.length_m);
    if (rec.d[n] <= 0)
      throw CollisionDetected(time_, static_cast<int>(n));
    rec.d_rel[n] =
        relative_braking_distance(own, rec.d[n], states_[n - 1].v, states_[n].v);
  }

  bool hold_leader = false;
  for (size_t i = 0; i < dwell_steps_left_.size(); ++i) {
    if (dwell_steps_left_[i] > 0 && states_[0].v < 0.01 &&
        std::abs(states_[0].s - sc_.line.stations[i].position_m) < 2.0) {
      hold_leader = true;
      --dwell_steps_left_[i];
      break;
    }
  }

  std::vector<PlannedTrajectory> published(n_trains);
  for (size_t n = 0; n < n_trains; ++n) {
    if (n == 0 && hold_leader) {
      published[0].t_s = t_s;
      published[0].s.assign(sc_.cfg.h_p + 2, states_[0].s);
      published[0].v.assign(sc_.cfg.h_p + 2, 0.0);
      prev_u_[0] = 0;
      prev_dec_[0].reset();
      continue;
    }
    SolveContext ctx;
    ctx.train = &sc_.trains[n].params;
    ctx.line = &sc_.line;
    ctx.profile = &profiles_[n];
    ctx.cfg = &sc_.cfg;
    ctx.role = n == 0 ? MpcRole::Leader : MpcRole::Follower;
    ctx.current = states_[n];
    ctx.prev_input = prev_u_[n];
    if (n > 0) {
      ctx.preceding = &published[n - 1];
      ctx.preceding_length = sc_.trains[n - 1].params.length_m;
    }
    if (prev_dec_[n]) {
      auto& sh = shifted_[n];
      const auto& pu = prev_dec_[n]->u;
      sh.u.resize(pu.size());
      for (size_t k = 0; k + 1 < pu.size(); ++k) sh.u[k] = pu[k + 1];
      sh.u.back() = pu.back();
      ctx.reference_guess = &sh;
    }

    const auto t0 = std::chrono::steady_clock::now();
    HorizonDecision dec =
        sets_[n] ? lmpc_plan(ctx, *sets_[n]) : plan(ctx);
    const auto t1 = std::chrono::steady_clock::now();

    auto& dg = rec.diags[n];
    dg.u = dec.u[0];
    dg.u_next = dec.u.size() > 1 ? dec.u[1] : dec.u[0];
    dg.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    dg.sqp_passes = dec.sqp_passes;
    dg.qp_iterations = dec.qp_iterations;
    dg.degraded = dec.degraded;
    dg.policy_cost = dec.policy_cost;
    dg.learning_cost = dec.learning_cost;
    dg.vterm_mix_gap = dec.vterm_mix_gap;
    if (!dec.lambda.empty()) {
      double sum = 0, mn = dec.lambda[0];
      for (double l : dec.lambda) {
        sum += l;
        mn = std::min(mn, l);
      }
      dg.lambda_sum = sum;
      dg.lambda_min = mn;
    }
    solve_wall_ms_ += dg.solve_ms;
    published[n] = published_plan(dec, t_s);
    prev_u_[n] = dec.u[0];
    prev_dec_[n] = std::move(dec);
  }

  for (size_t n = 0; n < n_trains; ++n) {
    TrackPoint track = sc_.line.track_at(states_[n].s);
    states_[n] = euler_step(sc_.trains[n].params, states_[n], rec.diags[n].u, track,
                            t_s, true);
  }
  for (size_t n = 1; n < n_trains; ++n) {
    if (gap_distance(states_[n - 1].s, states_[n].s,
                     sc_.trains[n - 1].params.length_m) <= 0)
      throw CollisionDetected(time_ + t_s, static_cast<int>(n));
  }
  time_ += t_s;
  return rec;
}

bool ConvoySimulator::finished() const {
  for (const auto& st : states_)
    if (st.v >= 0.01) return false;
  return std::abs(states_[0].s - final_station_) <= 5.0;
}

namespace {

// Upper bound on one traversal: ride the envelope, floor 0.3 m/s through
// stops, then take 5x slack for soft-tracking lag and creep phases.
size_t bootstrap_step_cap(const SpeedProfile& env, double t_s) {
  double t = 0;
  for (size_t i = 0; i + 1 < env.s.size(); ++i) {
    double ds = env.s[i + 1] - env.s[i];
    double vmid = std::max(0.3, 0.5 * (env.v[i] + env.v[i + 1]));
    t += ds / vmid;
  }
  return static_cast<size_t>(std::ceil(5.0 * t / t_s)) + 100;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& sc) {
  sc.validate();
  const size_t n_trains = sc.trains.size();

  ScenarioResult result;
  result.profiles.reserve(n_trains);
  for (const auto& t : sc.trains)
    result.profiles.push_back(build_envelope(sc.line, t.params, sc.cfg));
  result.safe_sets.resize(n_trains);

  size_t cap0 = bootstrap_step_cap(result.profiles[0], sc.cfg.t_s);
  size_t steps0 = 0;

  for (int r = 0; r <= sc.iterations; ++r) {
    std::vector<const SafeSet*> sets(n_trains, nullptr);
    if (r > 0) {
      for (size_t n = 0; n < n_trains; ++n)
        if (sc.trains[n].kind == ControllerKind::Learning)
          sets[n] = &result.safe_sets[n];
    }

    ConvoySimulator sim(sc, result.profiles, sets);
    IterationLog log;
    log.iteration_id = r;
    const size_t cap = r == 0 ? cap0 : 3 * steps0;
    try {
      while (!sim.finished()) {
        if (log.steps.size() >= cap)
          throw NonTermination("scenario " + sc.name + ": iteration " +
                               std::to_string(r) + " exceeded the step cap");
        log.steps.push_back(sim.step());
      }
      log.completed = true;
    } catch (const CollisionDetected&) {
      log.completed = false;
    }
    log.solve_wall_ms = sim.solve_wall_ms();
    log.simulated_s = sim.time();
    if (r == 0) steps0 = std::max<size_t>(log.steps.size(), 1);

    log.traces.resize(n_trains);
    for (size_t n = 0; n < n_trains; ++n) {
      auto& tr = log.traces[n];
      tr.t.reserve(log.steps.size());
      for (const auto& st : log.steps) {
        tr.t.push_back(st.t);
        tr.s.push_back(st.states[n].s);
        tr.v.push_back(st.states[n].v);
        tr.f.push_back(st.states[n].f);
        tr.u.push_back(st.diags[n].u);
      }
    }
    log.stage_costs.resize(n_trains);
    for (size_t n = 0; n < n_trains; ++n) {
      log.stage_costs[n] = stage_series(
          log.traces[n], n > 0 ? &log.traces[n - 1] : nullptr,
          n > 0 ? sc.trains[n - 1].params.length_m : 0.0, sc.trains[n].params,
          sc.cfg, result.profiles[n], n == 0 ? MpcRole::Leader : MpcRole::Follower);
    }
    if (log.completed && !log.steps.empty()) {
      for (size_t n = 0; n < n_trains; ++n)
        record_iteration(result.safe_sets[n], r, log.traces[n], log.stage_costs[n]);
    }
    result.iterations.push_back(std::move(log));
  }
  return result;
}

}  // namespace vc
