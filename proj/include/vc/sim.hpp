#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vc/core_model.hpp"
#include "vc/lmpc.hpp"
#include "vc/mpc.hpp"
#include "vc/speed_profile.hpp"

namespace vc {

enum class ControllerKind { Classical, Learning };

struct ScenarioTrain {
  std::string name;
  TrainParams params;
  ControllerKind kind = ControllerKind::Classical;
};

/// One convoy-on-a-line exercise. iterations counts the learning rounds;
/// the run always prepends the classical bootstrap, so iterations = R yields
/// R + 1 logs.
struct ScenarioConfig {
  std::string name;
  LineProfile line;
  std::vector<ScenarioTrain> trains;
  int iterations = 10;
  ControllerConfig cfg;
  void validate() const;
};

struct TrainStepDiag {
  double u = 0;        // applied command
  double u_next = 0;   // second horizon entry, the plan's intent for t + t_s
  double solve_ms = 0; // wall clock; outside the determinism contract
  int sqp_passes = 0;
  long qp_iterations = 0;
  bool degraded = false;
  double policy_cost = 0;
  double learning_cost = 0;
  double lambda_sum = 0;
  double lambda_min = 0;
  double vterm_mix_gap = 0;
};

/// Snapshot at time t before the step's plant update; d/d_rel are gaps at
/// these states (index 0 unused for the leader).
struct StepRecord {
  double t = 0;
  std::vector<TrainState> states;
  std::vector<TrainStepDiag> diags;
  std::vector<double> d;
  std::vector<double> d_rel;
};

struct IterationLog {
  int iteration_id = 0;
  bool completed = false;
  std::vector<StepRecord> steps;
  std::vector<IterationTrace> traces;            // per train, built from steps
  std::vector<std::vector<double>> stage_costs;  // per train, per step
  double solve_wall_ms = 0;
  double simulated_s = 0;
};

struct ScenarioResult {
  std::vector<IterationLog> iterations;
  std::vector<SafeSet> safe_sets;      // per train, state after the last run
  std::vector<SpeedProfile> profiles;  // per train
};

/// Convoy at rest: leader head at 0, each follower head a standstill gap of
/// exactly d_des behind its predecessor's tail.
std::vector<TrainState> initial_placement(const ScenarioConfig& sc);

/// Inner loop of one iteration: sequential per-train solves in convoy order,
/// same-step plan handoff, one plant step per call. A follower with no
/// predecessor plan yet never occurs; the leader publishes first.
class ConvoySimulator {
 public:
  /// safe_sets[n] null runs train n classical (bootstrap or assignment).
  ConvoySimulator(const ScenarioConfig& sc, const std::vector<SpeedProfile>& profiles,
                  const std::vector<const SafeSet*>& safe_sets);

  /// Advances one control period. Throws CollisionDetected when any gap
  /// closes to zero, checked both at the recorded states and after the
  /// plant update.
  StepRecord step();

  /// All trains at rest with the leader within 5 m of the final station.
  bool finished() const;

  const std::vector<TrainState>& states() const { return states_; }
  double time() const { return time_; }
  double solve_wall_ms() const { return solve_wall_ms_; }

 private:
  const ScenarioConfig& sc_;
  const std::vector<SpeedProfile>& profiles_;
  std::vector<const SafeSet*> sets_;
  std::vector<TrainState> states_;
  std::vector<double> prev_u_;
  std::vector<std::optional<HorizonDecision>> prev_dec_;
  std::vector<HorizonDecision> shifted_;
  std::vector<int> dwell_steps_left_;   // per station, leader hold budget
  double time_ = 0;
  double final_station_ = 0;
  double solve_wall_ms_ = 0;
};

/// Full outer loop: bootstrap iteration 0 with every train classical, then
/// R learning iterations with per-train assignment, each completed run
/// appended to every train's safe set. Collisions mark the iteration failed
/// and skip recording; exceeding the step cap throws NonTermination.
ScenarioResult run_scenario(const ScenarioConfig& sc);

}  // namespace vc
