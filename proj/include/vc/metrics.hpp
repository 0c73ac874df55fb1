#pragma once

#include <string>
#include <vector>

#include "vc/core_model.hpp"
#include "vc/lmpc.hpp"
#include "vc/speed_profile.hpp"

namespace vc {

/// Realized quantities of one logged step, plant data only.
/// d and d_rel are meaningful for followers; leaders ignore them.
struct StageMetricInputs {
  double v = 0;
  double jerk = 0;
  double v_dp = 0;  // envelope at the realized position
  double d = 0;
  double d_rel = 0;
};

/// Per-step convergence metric. Violations enter as realized surrogates:
/// over-speed, under-speed (only where the envelope allows motion), and
/// the two distance floors. Leaders add speed tracking, followers gap
/// tracking, both normalized like the controller cost.
double stage_metric(const StageMetricInputs& in, MpcRole role,
                    const ControllerConfig& cfg);

/// Stage metric series for a full trace. pred is null for the leader.
/// Jerk at step k is taken between commands k and k+1; the final step
/// contributes zero jerk.
std::vector<double> stage_series(const IterationTrace& own, const IterationTrace* pred,
                                 double pred_length, const TrainParams& params,
                                 const ControllerConfig& cfg,
                                 const SpeedProfile& profile, MpcRole role);

/// Energy and force aggregates over the steps whose position falls in
/// [from_m, to_m). Pass infinite bounds to cover a whole trace; the report
/// builder widens the first and last segment so every step lands somewhere.
struct EnergyForce {
  double specific_energy = 0;      // kJ/(t km), traction only
  double specific_energy_net = 0;  // kJ/(t km), signed
  double force_average = 0;        // kN, mean |F|
  double traction_force_average = 0;  // kN, mean max(F, 0)
  int steps = 0;
};

/// Throws EmptySegment when no step lands in the bounds. length_m is the
/// normalization distance (the segment length, not the distance traveled).
EnergyForce energy_and_force(const IterationTrace& trace, const TrainParams& params,
                             double t_s, double from_m, double to_m, double length_m);

/// Largest realized gap to the predecessor over steps in [from_m, to_m).
double max_reached_distance(const IterationTrace& own, const IterationTrace& pred,
                            double pred_length, double from_m, double to_m);

struct SegmentReport {
  std::string label;
  double from_m = 0;
  double to_m = 0;
  EnergyForce ef;
  double max_distance = 0;  // followers only
  double stage_cost_sum = 0;
  int steps = 0;
};

struct TrainReport {
  std::string name;
  bool follower = false;
  std::vector<SegmentReport> segments;
  SegmentReport line;  // complete-line aggregate
  double travel_time_s = 0;
  double avg_stage_cost = 0;
};

struct MetricsReport {
  std::string line_name;
  std::vector<TrainReport> trains;
  double convoy_specific_energy = 0;  // sum over trains
  double convoy_force_average = 0;
  double simulated_time_s = 0;
};

/// Everything the report builder needs about one train's run.
struct TrainRunView {
  std::string name;
  const TrainParams* params = nullptr;
  const IterationTrace* trace = nullptr;
  const SpeedProfile* profile = nullptr;
  const IterationTrace* pred_trace = nullptr;  // null for the leader
  double pred_length = 0;
};

/// Full per-iteration report: per-segment and complete-line metrics per
/// train plus convoy aggregates. Segment membership is by own position;
/// steps before the first span or past the last are folded into them.
MetricsReport build_report(const std::vector<TrainRunView>& runs,
                           const LineProfile& line, const ControllerConfig& cfg,
                           double t_s);

/// Mean stage cost per train for one iteration.
std::vector<double> iteration_summary(const std::vector<std::vector<double>>& stage_costs);

/// Iteration-over-iteration variation of a per-iteration average series,
/// relative to the first value: out[r] = (avg[r] - avg[r-1]) / avg[0].
/// out[0] = 0 by convention.
std::vector<double> convergence_variation(const std::vector<double>& per_iter_avg);

/// First iteration r >= 1 whose absolute variation drops below the
/// threshold; -1 when none does.
int converged_iteration(const std::vector<double>& per_iter_avg,
                        double threshold = 0.01);

/// One row of the baseline-vs-learned delta table.
struct MetricDelta {
  std::string train;
  std::string scope;   // segment label or "line" or "convoy"
  std::string metric;  // "specific_energy", "force_average", ...
  double baseline = 0;
  double learned = 0;
  double abs_delta = 0;
  double pct_delta = 0;  // percent of baseline; 0 when baseline is 0
};

/// Compares two reports of the same scenario shape. Throws
/// MismatchedScenarios when train counts, names, or segment layouts differ.
std::vector<MetricDelta> compare_runs(const MetricsReport& baseline,
                                      const MetricsReport& learned);

}  // namespace vc
