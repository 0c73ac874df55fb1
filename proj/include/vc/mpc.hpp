#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "vc/core_model.hpp"
#include "vc/qp.hpp"
#include "vc/speed_profile.hpp"

namespace vc {

enum class MpcRole { Leader, Follower };

struct HorizonSlacks {
  std::vector<double> eps_vmax;  // envelope overshoot, indices 0..h_p
  std::vector<double> eps_vmin;  // undercut of the soft floor, 0..h_p
  std::vector<double> eps_drel;  // relative-braking-gap shortfall, 0..h_p+1 (followers)
  double eps_d = 0;              // terminal hard-gap shortfall (followers)
};

struct HorizonDecision {
  std::vector<double> u;           // commands 0..h_p; constant from index h_c-1 on
  std::vector<TrainState> states;  // rollout 0..h_p+1 under u, speed floored at 0
  HorizonSlacks slacks;
  std::vector<double> lambda;      // terminal convex weights; empty when not learning
  double policy_cost = 0;
  double learning_cost = 0;
  double vterm_mix_gap = 0;  // |terminal speed - sampled mix| in the final QP
  int sqp_passes = 0;
  long qp_iterations = 0;
  bool degraded = false;  // solver hit its iteration cap; best iterate kept
};

struct SolveContext {
  const TrainParams* train = nullptr;
  const LineProfile* line = nullptr;
  const SpeedProfile* profile = nullptr;
  const ControllerConfig* cfg = nullptr;
  MpcRole role = MpcRole::Leader;
  TrainState current;
  double prev_input = 0;  // last applied command; bounds the first jerk
  const PlannedTrajectory* preceding = nullptr;  // same-step plan of the train ahead
  double preceding_length = 0;                   // m
  const HorizonDecision* reference_guess = nullptr;  // previous solution, shifted
};

/// One-step affine models x_{k+1} = a_k x_k + b_k u_k + g_k around a
/// reference rollout. The v^2 resistance term is replaced by its tangent at
/// v_ref; grade and curvature are frozen at the reference positions.
struct Linearization {
  std::vector<Eigen::Matrix3d> a;   // 0..h_p
  std::vector<Eigen::Vector3d> b;
  std::vector<Eigen::Vector3d> g;
  std::vector<double> s_ref;        // 0..h_p+1
  std::vector<double> v_ref;
  std::vector<double> u_ref;        // 0..h_p
};

Linearization linearize_dynamics(const TrainParams& p, const LineProfile& line,
                                 const std::vector<TrainState>& ref,
                                 const std::vector<double>& u_ref, double t_s);

/// Tangent of the bilinear power product u*v at (u_ref, v_ref):
/// c_u u + c_v v constrained to [rhs_lo, rhs_hi]. Below 0.5 m/s the row is
/// inactive and the force bounds alone govern.
struct PowerRow {
  bool active = false;
  double c_u = 0;
  double c_v = 0;
  double rhs_lo = 0;
  double rhs_hi = 0;
};
PowerRow linearize_power(const TrainParams& p, double v_ref, double u_ref);

struct QpLayout {
  int n_free = 0;     // distinct command variables, = h_c
  int i_eps_vmax = 0;
  int i_eps_vmin = 0;
  int i_eps_drel = -1;
  int i_eps_d = -1;
  int i_vterm = 0;    // auxiliary variable equal to the terminal speed
  int n_vars = 0;
};

struct PolicyQp {
  QpProblem qp;
  QpLayout layout;
};

/// Condensed QP over commands and slacks for one SQP pass. States are
/// eliminated through the linearized rollout; one auxiliary variable carries
/// the terminal speed so a learning term can attach to it.
PolicyQp build_policy_qp(const SolveContext& ctx, const Linearization& lin);

/// Receding-horizon solve: successive linearization around the rollout of the
/// previous pass, until the command trajectory moves less than sqp_step_tol
/// (RMS) or sqp_max_passes is reached. Returns states from the clamped
/// nonlinear rollout of the final commands.
HorizonDecision plan(const SolveContext& ctx);

/// Position/speed trajectory handed to the train behind.
PlannedTrajectory published_plan(const HorizonDecision& d, double t_s);

namespace detail {

/// Extension point for the learning terminal term; classical planning passes
/// null. augment appends variables after build_policy_qp, learning_weights is
/// the cost vector over those appended variables.
struct PlanHooks {
  std::function<void(QpProblem&, int /*i_vterm*/)> augment;
  const std::vector<double>* learning_weights = nullptr;
  const std::vector<double>* window_speeds = nullptr;
};

HorizonDecision plan_impl(const SolveContext& ctx, const PlanHooks* hooks);

}  // namespace detail

}  // namespace vc
