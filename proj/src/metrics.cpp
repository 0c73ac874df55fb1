#include "vc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vc {

namespace {

double sq(double v) { return v * v; }

bool in_span(double s, double from, double to) { return s >= from && s < to; }

}  // namespace

double stage_metric(const StageMetricInputs& in, MpcRole role,
                    const ControllerConfig& cfg) {
  const double eps_vmax = std::max(0.0, in.v - in.v_dp);
  const double eps_vmin =
      in.v_dp > cfg.v_min ? std::max(0.0, cfg.v_min - in.v) : 0.0;
  double cost = sq(in.jerk / cfg.j_max) +
                cfg.w_eps_vmin * eps_vmin / cfg.v_max +
                cfg.w_eps_vmax * eps_vmax / cfg.v_max;
  if (role == MpcRole::Leader) {
    cost += sq((in.v - in.v_dp) / cfg.v_max);
  } else {
    const double eps_drel = std::max(0.0, cfg.d_des - in.d_rel);
    const double eps_d = std::max(0.0, cfg.d_min - in.d);
    cost += sq((in.d - cfg.d_des) / cfg.d_des) +
            cfg.w_eps_drel * eps_drel / cfg.d_des +
            cfg.w_eps_d * eps_d / cfg.d_des;
  }
  return cost;
}

std::vector<double> stage_series(const IterationTrace& own, const IterationTrace* pred,
                                 double pred_length, const TrainParams& params,
                                 const ControllerConfig& cfg,
                                 const SpeedProfile& profile, MpcRole role) {
  const size_t n = own.s.size();
  std::vector<double> out(n);
  for (size_t k = 0; k < n; ++k) {
    StageMetricInputs in;
    in.v = own.v[k];
    in.v_dp = profile.query(own.s[k]);
    in.jerk = k + 1 < n ? jerk_of(params, own.u[k], own.u[k + 1], cfg.t_s) : 0.0;
    if (pred) {
      size_t kp = std::min(k, pred->s.size() - 1);
      in.d = gap_distance(pred->s[kp], own.s[k], pred_length);
      in.d_rel = relative_braking_distance(params, in.d, pred->v[kp], own.v[k]);
    }
    out[k] = stage_metric(in, role, cfg);
  }
  return out;
}

EnergyForce energy_and_force(const IterationTrace& trace, const TrainParams& params,
                             double t_s, double from_m, double to_m, double length_m) {
  EnergyForce ef;
  double e_j = 0, e_net_j = 0, sum_abs = 0, sum_pos = 0;
  const size_t n = trace.s.size();
  for (size_t k = 0; k < n; ++k) {
    if (!in_span(trace.s[k], from_m, to_m)) continue;
    const double f = trace.f[k];
    const double p = f * trace.v[k] * t_s;
    e_j += std::max(0.0, p);
    e_net_j += p;
    sum_abs += std::abs(f);
    sum_pos += std::max(0.0, f);
    ++ef.steps;
  }
  if (ef.steps == 0) throw EmptySegment("energy_and_force: no steps in bounds");
  const double t_km = (params.mass_kg / 1000.0) * (length_m / 1000.0);
  ef.specific_energy = (e_j / 1000.0) / t_km;
  ef.specific_energy_net = (e_net_j / 1000.0) / t_km;
  ef.force_average = sum_abs / ef.steps / 1000.0;
  ef.traction_force_average = sum_pos / ef.steps / 1000.0;
  return ef;
}

double max_reached_distance(const IterationTrace& own, const IterationTrace& pred,
                            double pred_length, double from_m, double to_m) {
  double best = 0;
  for (size_t k = 0; k < own.s.size(); ++k) {
    if (!in_span(own.s[k], from_m, to_m)) continue;
    size_t kp = std::min(k, pred.s.size() - 1);
    best = std::max(best, gap_distance(pred.s[kp], own.s[k], pred_length));
  }
  return best;
}

MetricsReport build_report(const std::vector<TrainRunView>& runs,
                           const LineProfile& line, const ControllerConfig& cfg,
                           double t_s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto spans = segmentize(line);
  MetricsReport rep;
  rep.line_name = line.name;
  const double total_len = spans.back().to_m - spans.front().from_m;

  for (const auto& run : runs) {
    TrainReport tr;
    tr.name = run.name;
    tr.follower = run.pred_trace != nullptr;
    const MpcRole role = tr.follower ? MpcRole::Follower : MpcRole::Leader;
    const auto stage = stage_series(*run.trace, run.pred_trace, run.pred_length,
                                    *run.params, cfg, *run.profile, role);

    for (size_t i = 0; i < spans.size(); ++i) {
      SegmentReport seg;
      seg.label = spans[i].label;
      seg.from_m = spans[i].from_m;
      seg.to_m = spans[i].to_m;
      const double lo = i == 0 ? -inf : spans[i].from_m;
      const double hi = i + 1 == spans.size() ? inf : spans[i].to_m;
      seg.ef = energy_and_force(*run.trace, *run.params, t_s, lo, hi,
                                spans[i].to_m - spans[i].from_m);
      seg.steps = seg.ef.steps;
      if (tr.follower)
        seg.max_distance = max_reached_distance(*run.trace, *run.pred_trace,
                                                run.pred_length, lo, hi);
      for (size_t k = 0; k < run.trace->s.size(); ++k)
        if (in_span(run.trace->s[k], lo, hi)) seg.stage_cost_sum += stage[k];
      tr.segments.push_back(std::move(seg));
    }

    tr.line.label = "line";
    tr.line.from_m = spans.front().from_m;
    tr.line.to_m = spans.back().to_m;
    tr.line.ef = energy_and_force(*run.trace, *run.params, t_s, -inf, inf, total_len);
    tr.line.steps = tr.line.ef.steps;
    if (tr.follower)
      tr.line.max_distance = max_reached_distance(*run.trace, *run.pred_trace,
                                                  run.pred_length, -inf, inf);
    for (double c : stage) tr.line.stage_cost_sum += c;
    tr.avg_stage_cost = stage.empty() ? 0 : tr.line.stage_cost_sum / stage.size();

    const auto& v = run.trace->v;
    for (size_t k = v.size(); k-- > 0;) {
      if (v[k] > 0.01) {
        tr.travel_time_s = run.trace->t[k] + t_s;
        break;
      }
    }

    rep.convoy_specific_energy += tr.line.ef.specific_energy;
    rep.convoy_force_average += tr.line.ef.force_average;
    if (!run.trace->t.empty())
      rep.simulated_time_s =
          std::max(rep.simulated_time_s, run.trace->t.back() + t_s);
    rep.trains.push_back(std::move(tr));
  }
  return rep;
}

std::vector<double> iteration_summary(
    const std::vector<std::vector<double>>& stage_costs) {
  std::vector<double> out;
  out.reserve(stage_costs.size());
  for (const auto& series : stage_costs) {
    double sum = 0;
    for (double c : series) sum += c;
    out.push_back(series.empty() ? 0 : sum / series.size());
  }
  return out;
}

std::vector<double> convergence_variation(const std::vector<double>& per_iter_avg) {
  std::vector<double> out(per_iter_avg.size(), 0.0);
  if (per_iter_avg.empty() || per_iter_avg[0] <= 0) return out;
  for (size_t r = 1; r < per_iter_avg.size(); ++r)
    out[r] = (per_iter_avg[r] - per_iter_avg[r - 1]) / per_iter_avg[0];
  return out;
}

int converged_iteration(const std::vector<double>& per_iter_avg, double threshold) {
  const auto var = convergence_variation(per_iter_avg);
  for (size_t r = 1; r < var.size(); ++r)
    if (std::abs(var[r]) < threshold) return static_cast<int>(r);
  return -1;
}

std::vector<MetricDelta> compare_runs(const MetricsReport& baseline,
                                      const MetricsReport& learned) {
  if (baseline.line_name != learned.line_name ||
      baseline.trains.size() != learned.trains.size())
    throw MismatchedScenarios("compare_runs: reports cover different scenarios");
  for (size_t i = 0; i < baseline.trains.size(); ++i) {
    const auto& a = baseline.trains[i];
    const auto& b = learned.trains[i];
    if (a.name != b.name || a.segments.size() != b.segments.size())
      throw MismatchedScenarios("compare_runs: train layout differs");
    for (size_t j = 0; j < a.segments.size(); ++j)
      if (a.segments[j].label != b.segments[j].label)
        throw MismatchedScenarios("compare_runs: segment layout differs");
  }

  std::vector<MetricDelta> rows;
  auto push = [&rows](const std::string& train, const std::string& scope,
                      const std::string& metric, double base, double got) {
    MetricDelta d;
    d.train = train;
    d.scope = scope;
    d.metric = metric;
    d.baseline = base;
    d.learned = got;
    d.abs_delta = got - base;
    d.pct_delta = base != 0 ? (got - base) / base * 100.0 : 0.0;
    rows.push_back(std::move(d));
  };

  for (size_t i = 0; i < baseline.trains.size(); ++i) {
    const auto& a = baseline.trains[i];
    const auto& b = learned.trains[i];
    for (size_t j = 0; j < a.segments.size(); ++j) {
      const auto& sa = a.segments[j];
      const auto& sb = b.segments[j];
      push(a.name, sa.label, "specific_energy", sa.ef.specific_energy,
           sb.ef.specific_energy);
      push(a.name, sa.label, "specific_energy_net", sa.ef.specific_energy_net,
           sb.ef.specific_energy_net);
      push(a.name, sa.label, "force_average", sa.ef.force_average,
           sb.ef.force_average);
      if (a.follower)
        push(a.name, sa.label, "max_distance", sa.max_distance, sb.max_distance);
    }
    push(a.name, "line", "specific_energy", a.line.ef.specific_energy,
         b.line.ef.specific_energy);
    push(a.name, "line", "specific_energy_net", a.line.ef.specific_energy_net,
         b.line.ef.specific_energy_net);
    push(a.name, "line", "force_average", a.line.ef.force_average,
         b.line.ef.force_average);
    if (a.follower)
      push(a.name, "line", "max_distance", a.line.max_distance, b.line.max_distance);
    push(a.name, "line", "travel_time", a.travel_time_s, b.travel_time_s);
    push(a.name, "line", "avg_stage_cost", a.avg_stage_cost, b.avg_stage_cost);
  }
  push("convoy", "line", "specific_energy", baseline.convoy_specific_energy,
       learned.convoy_specific_energy);
  push("convoy", "line", "force_average", baseline.convoy_force_average,
       learned.convoy_force_average);
  return rows;
}

}  // namespace vc
