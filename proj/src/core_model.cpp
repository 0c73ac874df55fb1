#include "vc/core_model.hpp"

#include <algorithm>
#include <cmath>

namespace vc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void TrainParams::validate() const {
  require(mass_kg > 0, name + ": mass_kg must be > 0");
  require(length_m > 0, name + ": length_m must be > 0");
  require(davis_a >= 0 && davis_b >= 0 && davis_c >= 0,
          name + ": Davis coefficients must be >= 0");
  require(tau_s > 0, name + ": tau_s must be > 0");
  require(f_traction_max > 0 && f_brake_max > 0, name + ": force bounds must be > 0");
  require(p_traction_max > 0 && p_brake_max > 0, name + ": power bounds must be > 0");
  require(brake_rate_lead > 0 && brake_rate_self > 0,
          name + ": brake rates must be > 0");
}

void LineProfile::validate() const {
  require(length_m > 0, name + ": length_m must be > 0");
  require(!sections.empty(), name + ": no sections");
  double cursor = 0;
  for (const auto& sec : sections) {
    require(std::abs(sec.from_m - cursor) < 1e-9, name + ": sections not contiguous");
    require(sec.to_m > sec.from_m, name + ": empty section");
    require(std::abs(sec.grade) <= 0.04, name + ": grade outside +-0.04");
    require(sec.curvature >= 0, name + ": negative curvature");
    require(sec.speed_limit > 0, name + ": non-positive speed limit");
    cursor = sec.to_m;
  }
  require(std::abs(cursor - length_m) < 1e-9, name + ": sections do not cover the line");
  require(stations.size() >= 2, name + ": need at least two stations");
  double prev = -1;
  for (const auto& st : stations) {
    require(st.position_m >= 0 && st.position_m <= length_m,
            name + ": station outside the line");
    require(st.position_m > prev, name + ": stations not strictly increasing");
    require(st.dwell_s >= 0, name + ": negative dwell");
    prev = st.position_m;
  }
  require(std::abs(stations.back().position_m - length_m) < 1e-9,
          name + ": last station must sit at the line end");
}

const Section& LineProfile::section_at(double s) const {
  // Positions outside the line clamp to the first/last section; followers
  // start behind s = 0.
  if (s < sections.front().to_m) return sections.front();
  if (s >= sections.back().from_m) return sections.back();
  auto it = std::upper_bound(sections.begin(), sections.end(), s,
                             [](double pos, const Section& sec) { return pos < sec.to_m; });
  return *it;
}

TrackPoint LineProfile::track_at(double s) const {
  const Section& sec = section_at(s);
  return {sec.grade, sec.curvature};
}

double LineProfile::limit_at(double s) const { return section_at(s).speed_limit; }

void ControllerConfig::validate() const {
  require(t_s > 0, "t_s must be > 0");
  require(h_p >= 2, "h_p must be >= 2");
  require(h_c >= 1 && h_c <= h_p, "h_c must be in [1, h_p]");
  require(v_max > 0 && v_min >= 0 && v_min < v_max, "speed bounds inconsistent");
  require(j_max > 0, "j_max must be > 0");
  require(d_des > 0 && d_min > 0 && d_min <= d_des, "gap targets inconsistent");
  require(sqp_max_passes >= 1, "sqp_max_passes must be >= 1");
  require(grid_ds > 0, "grid_ds must be > 0");
}

double total_resistance(const TrainParams& p, double v, double grade, double curvature) {
  double r = p.davis_a + p.davis_b * v + p.davis_c * v * v;
  r += p.mass_kg * kGravity * grade;
  r += p.mass_kg * 6.0 * curvature;
  return r;
}

StateDerivative state_derivative(const TrainParams& p, const TrainState& x, double u,
                                 const TrackPoint& track) {
  StateDerivative d;
  d.ds = x.v;
  d.dv = (x.f - total_resistance(p, x.v, track.grade, track.curvature)) / p.mass_kg;
  d.df = (u - x.f) / p.tau_s;
  return d;
}

TrainState euler_step(const TrainParams& p, const TrainState& x, double u,
                      const TrackPoint& track, double t_s, bool clamp_standstill) {
  StateDerivative d = state_derivative(p, x, u, track);
  TrainState next;
  next.s = x.s + t_s * d.ds;
  next.v = x.v + t_s * d.dv;
  next.f = x.f + t_s * d.df;
  if (clamp_standstill && next.v < 0) next.v = 0;
  return next;
}

double jerk_of(const TrainParams& p, double u_prev, double u_next, double t_s) {
  return (u_next - u_prev) / (p.mass_kg * t_s);
}

double gap_distance(double s_pred, double s_own, double pred_length_m) {
  return s_pred - s_own - pred_length_m;
}

double relative_braking_distance(const TrainParams& own, double gap, double v_pred,
                                 double v_own) {
  return gap + v_pred * v_pred / (2.0 * own.brake_rate_lead) -
         v_own * v_own / (2.0 * own.brake_rate_self);
}

}  // namespace vc
