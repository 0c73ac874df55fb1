#pragma once

#include <string>
#include <vector>

#include "vc/core_model.hpp"

namespace vc {

/// Position-indexed speed envelope. Samples are strictly increasing in s;
/// query() interpolates linearly and clamps at both ends.
struct SpeedProfile {
  std::vector<double> s;
  std::vector<double> v;

  double query(double pos) const;

  /// Largest envelope value at or beyond pos. Zero past the final station,
  /// which is how controllers know the run is over.
  double max_ahead(double pos) const;

 private:
  friend SpeedProfile build_envelope(const LineProfile&, const TrainParams&,
                                     const ControllerConfig&, double);
  std::vector<double> suffix_max_;
};

/// Builds the driving envelope for one train on one line:
///   1. pointwise cap min(civil limit, v_max), forced to 0 at stations;
///   2. backward pass limiting deceleration to brake_rate_self;
///   3. forward pass limiting acceleration to what traction force/power leave
///      after resistance, floored at 0.05 m/s^2.
/// grid_ds <= 0 picks the config default. Station and section boundaries are
/// always inserted as samples so v = 0 lands exactly on each station.
SpeedProfile build_envelope(const LineProfile& line, const TrainParams& p,
                            const ControllerConfig& cfg, double grid_ds = 0);

/// Station-to-station reporting span. Anything before the first station is
/// folded into the first span.
struct SegmentSpan {
  double from_m = 0;
  double to_m = 0;
  std::string label;
};

std::vector<SegmentSpan> segmentize(const LineProfile& line);

}  // namespace vc
