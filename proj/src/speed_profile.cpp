#include "vc/speed_profile.hpp"

#include <algorithm>
#include <cmath>

namespace vc {

double SpeedProfile::query(double pos) const {
  if (pos <= s.front()) return v.front();
  if (pos >= s.back()) return v.back();
  auto it = std::lower_bound(s.begin(), s.end(), pos);
  size_t i = static_cast<size_t>(it - s.begin());
  if (s[i] == pos) return v[i];
  double w = (pos - s[i - 1]) / (s[i] - s[i - 1]);
  return v[i - 1] + w * (v[i] - v[i - 1]);
}

double SpeedProfile::max_ahead(double pos) const {
  if (pos <= s.front()) return suffix_max_.front();
  if (pos >= s.back()) return v.back();
  auto it = std::lower_bound(s.begin(), s.end(), pos);
  size_t i = static_cast<size_t>(it - s.begin());
  // Interpolated value at pos can exceed the suffix max of the samples ahead
  // only on a falling edge, where the interpolant is itself the max.
  return std::max(query(pos), suffix_max_[i]);
}

SpeedProfile build_envelope(const LineProfile& line, const TrainParams& p,
                            const ControllerConfig& cfg, double grid_ds) {
  double ds = grid_ds > 0 ? grid_ds : cfg.grid_ds;

  std::vector<double> grid;
  size_t n_uniform = static_cast<size_t>(std::ceil(line.length_m / ds));
  grid.reserve(n_uniform + line.sections.size() + line.stations.size() + 2);
  for (size_t i = 0; i <= n_uniform; ++i) grid.push_back(std::min(i * ds, line.length_m));
  for (const auto& sec : line.sections) grid.push_back(sec.from_m);
  for (const auto& st : line.stations) grid.push_back(st.position_m);
  grid.push_back(line.length_m);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-9; }),
             grid.end());

  size_t n = grid.size();
  std::vector<double> cap(n);
  for (size_t i = 0; i < n; ++i) {
    double pos = grid[i];
    double limit = line.limit_at(pos);
    // A sample sitting exactly on a section boundary takes the stricter side.
    for (const auto& sec : line.sections)
      if (std::abs(sec.from_m - pos) < 1e-9 || std::abs(sec.to_m - pos) < 1e-9)
        limit = std::min(limit, sec.speed_limit);
    cap[i] = std::min(limit, cfg.v_max);
  }
  for (const auto& st : line.stations) {
    auto it = std::lower_bound(grid.begin(), grid.end(), st.position_m - 1e-9);
    cap[static_cast<size_t>(it - grid.begin())] = 0;
  }

  for (size_t i = 0; i + 1 < n; ++i) {
    if (cap[i] > 1e-12) continue;
    bool at_station =
        std::any_of(line.stations.begin(), line.stations.end(), [&](const Station& st) {
          return std::abs(st.position_m - grid[i]) < 1e-6;
        });
    if (!at_station)
      throw InfeasibleLine(line.name + ": envelope forced to 0 away from any station near s=" +
                           std::to_string(grid[i]));
  }

  std::vector<double> env = cap;
  for (size_t i = n - 1; i-- > 0;) {
    double gap = grid[i + 1] - grid[i];
    double mid = 0.5 * (grid[i] + grid[i + 1]);
    TrackPoint track = line.track_at(mid);
    // Braking capability fades with speed once the power cap binds, so the
    // comfort rate alone would promise stops the train cannot deliver.
    double v = env[i + 1];
    double force = std::min(p.f_brake_max, p.p_brake_max / std::max(v, 1.0));
    double acc = (force + total_resistance(p, v, track.grade, track.curvature)) / p.mass_kg;
    acc = std::min(p.brake_rate_self, std::max(acc, 0.05));
    env[i] = std::min(env[i], std::sqrt(v * v + 2.0 * acc * gap));
  }
  for (size_t i = 0; i + 1 < n; ++i) {
    double gap = grid[i + 1] - grid[i];
    double mid = 0.5 * (grid[i] + grid[i + 1]);
    TrackPoint track = line.track_at(mid);
    double v = env[i];
    double force = std::min(p.f_traction_max, p.p_traction_max / std::max(v, 1.0));
    double acc = (force - total_resistance(p, v, track.grade, track.curvature)) / p.mass_kg;
    acc = std::max(acc, 0.05);
    env[i + 1] = std::min(env[i + 1], std::sqrt(v * v + 2.0 * acc * gap));
  }

  SpeedProfile prof;
  prof.s = std::move(grid);
  prof.v = std::move(env);
  prof.suffix_max_.resize(n);
  double running = 0;
  for (size_t i = n; i-- > 0;) {
    running = std::max(running, prof.v[i]);
    prof.suffix_max_[i] = running;
  }
  return prof;
}

std::vector<SegmentSpan> segmentize(const LineProfile& line) {
  if (line.stations.empty()) throw NoStations(line.name + ": no stations");
  std::vector<SegmentSpan> spans;
  for (size_t i = 0; i + 1 < line.stations.size(); ++i) {
    SegmentSpan span;
    span.from_m = i == 0 ? std::min(0.0, line.stations[i].position_m)
                         : line.stations[i].position_m;
    span.to_m = line.stations[i + 1].position_m;
    span.label = "segment" + std::to_string(i + 1);
    spans.push_back(span);
  }
  if (spans.empty()) {
    // Single station: the whole line is one span ending there.
    spans.push_back({0.0, line.stations.back().position_m, "segment1"});
  }
  return spans;
}

}  // namespace vc
