#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vc/mpc.hpp"

namespace vc {

/// Realized per-step series of one train over one completed run.
/// Arrays share indexing: sample k holds the state at step k and the
/// input applied there. f is the actuator force state, u the command.
struct IterationTrace {
  std::vector<double> t;
  std::vector<double> s;
  std::vector<double> v;
  std::vector<double> f;
  std::vector<double> u;
};

/// One completed traversal kept for terminal-set reuse.
struct StoredIteration {
  int iteration_id = 0;
  IterationTrace trace;
  std::vector<double> stage_cost;
  std::vector<double> cost_to_go;  // suffix sums of stage_cost
};

/// Accumulated safe samples across iterations of one scenario.
/// config_hash ties the set to the controller/train/line tuple it was
/// recorded under; stale sets must not be reused.
struct SafeSet {
  std::uint64_t config_hash = 0;
  std::vector<StoredIteration> iterations;
};

/// Appends a traversal to the set. Computes cost_to_go from stage costs.
/// All arrays must share one length; throws LengthMismatch otherwise.
void record_iteration(SafeSet& set, int iteration_id, IterationTrace trace,
                      std::vector<double> stage_cost);

/// Safe samples offered to one solve: candidate terminal speeds and the
/// matching learned weight per sample (cost-to-go or stage cost).
struct SafeSampleWindow {
  std::vector<double> speeds;
  std::vector<double> qf;
};

/// Collects, from every stored iteration, the h_p+1 samples starting at the
/// first stored position at or past s_now (final sample repeated past the
/// end). Throws EmptySafeSet when the set holds no iterations.
SafeSampleWindow window_at(const SafeSet& set, double s_now, int h_p, QfMode mode);

/// Widens the QP with one convex-combination variable per window sample:
/// lambda >= 0, sum lambda = 1, terminal speed pinned to the sampled mix,
/// and the learned weights added to the linear cost.
void augment_with_learning(QpProblem& qp, const SafeSampleWindow& window,
                           int terminal_speed_var_index);

/// Policy solve with terminal-set reuse. An empty set falls back to the
/// plain policy (bootstrap iteration); otherwise the terminal speed is
/// constrained to the sampled window and the decision carries lambda and
/// the learned cost.
HorizonDecision lmpc_plan(const SolveContext& ctx, const SafeSet& set);

}  // namespace vc
