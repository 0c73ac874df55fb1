#pragma once

#include <string>
#include <vector>

#include "vc/errors.hpp"

namespace vc {

inline constexpr double kGravity = 9.81;  // m/s^2

/// Longitudinal parameters of one train unit.
///
/// Davis coefficients are in N, N/(m/s), N/(m/s)^2. Force and power bounds are
/// split between traction and braking; brake_rate_lead is the deceleration
/// assumed for the train ahead when computing the relative braking distance,
/// brake_rate_self the own service braking rate.
struct TrainParams {
  std::string name;
  double mass_kg = 0;
  double length_m = 0;
  double davis_a = 0;
  double davis_b = 0;
  double davis_c = 0;
  double tau_s = 0;             // traction/brake actuation lag
  double f_traction_max = 0;    // N
  double f_brake_max = 0;       // N, magnitude
  double p_traction_max = 0;    // W
  double p_brake_max = 0;       // W, magnitude
  double brake_rate_lead = 0;   // m/s^2
  double brake_rate_self = 0;   // m/s^2
  double adhesion_mu = 0;       // stored only; force bounds already encode adhesion

  void validate() const;
};

/// Track geometry under the train head.
struct TrackPoint {
  double grade = 0;      // rise/run, signed
  double curvature = 0;  // 1/R in 1/m, 0 on straight track
};

/// Train state: head position, speed, actuator force.
struct TrainState {
  double s = 0;  // m
  double v = 0;  // m/s
  double f = 0;  // N, applied force after actuation lag
};

/// Piecewise-constant geometry section [from_m, to_m).
struct Section {
  double from_m = 0;
  double to_m = 0;
  double grade = 0;
  double curvature = 0;
  double speed_limit = 0;  // m/s, civil limit
};

struct Station {
  double position_m = 0;
  double dwell_s = 0;
};

/// Static line description. Sections must tile [0, length_m] contiguously;
/// stations are sorted and the last one sits at the line end.
struct LineProfile {
  std::string name;
  double length_m = 0;
  std::vector<Section> sections;
  std::vector<Station> stations;

  void validate() const;
  const Section& section_at(double s) const;
  TrackPoint track_at(double s) const;
  double limit_at(double s) const;
};

enum class QfMode { CostToGo, StageOnly };

struct QpSettings {
  double eps = 1e-6;        // scaled KKT residual target
  int max_iterations = 4000;
  double sigma = 1e-6;
  double alpha = 1.6;       // over-relaxation
  bool debug_dump = false;
  std::string debug_dump_path;
};

/// Horizon, normalization and weight knobs shared by every controller.
struct ControllerConfig {
  double t_s = 0.2;     // s
  int h_p = 20;         // prediction horizon, steps
  int h_c = 2;          // control horizon, steps
  double v_max = 30.6;  // m/s, normalization and envelope cap
  double v_min = 0.5;   // m/s, soft lower bound while running
  double j_max = 0.98;  // m/s^3
  double d_des = 10.0;  // m, target standstill gap
  double d_min = 4.0;   // m, hard floor on the gap (soft in the QP)
  double w_eps_vmax = 1.0;
  double w_eps_vmin = 1.0;
  double w_eps_drel = 1.0;
  double w_eps_d = 1.0;
  int sqp_max_passes = 3;
  double sqp_step_tol = 1.0;  // N, RMS input change between passes
  QfMode qf_mode = QfMode::CostToGo;
  double grid_ds = 1.0;  // m, envelope grid pitch
  QpSettings qp;

  void validate() const;
};

/// Position/speed trajectory a train publishes for the train behind it.
/// Sampled at t_s; index 0 is the current state.
struct PlannedTrajectory {
  std::vector<double> s;
  std::vector<double> v;
  double t_s = 0.2;
};

/// Running resistance plus grade and curve components, in N.
/// R = A + B v + C v^2 + M g i + M (6 / R_curve); curvature 0 means straight.
double total_resistance(const TrainParams& p, double v, double grade, double curvature);

struct StateDerivative {
  double ds = 0;
  double dv = 0;
  double df = 0;
};

/// Continuous-time derivative of (s, v, f) under command u. Not clamped:
/// negative speeds can appear if integrated blindly, see euler_step.
StateDerivative state_derivative(const TrainParams& p, const TrainState& x, double u,
                                 const TrackPoint& track);

/// One forward-Euler step. With clamp_standstill the speed is floored at 0 so
/// resistance or braking cannot reverse a stopped train; the actuator state
/// integrates either way.
TrainState euler_step(const TrainParams& p, const TrainState& x, double u,
                      const TrackPoint& track, double t_s, bool clamp_standstill);

/// Jerk implied by consecutive force commands, (u_next - u_prev) / (M t_s).
double jerk_of(const TrainParams& p, double u_prev, double u_next, double t_s);

/// Head-to-tail gap to the train ahead.
double gap_distance(double s_pred, double s_own, double pred_length_m);

/// Gap corrected by the braking-distance difference: the margin left if the
/// train ahead brakes at brake_rate_lead while this train brakes at
/// brake_rate_self.
double relative_braking_distance(const TrainParams& own, double gap, double v_pred,
                                 double v_own);

}  // namespace vc
