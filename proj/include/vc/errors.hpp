#pragma once

#include <stdexcept>
#include <string>

namespace vc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct InfeasibleLine : Error {
  using Error::Error;
};

struct NoStations : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct EmptySafeSet : Error {
  using Error::Error;
};

struct ConfigHashMismatch : Error {
  using Error::Error;
};

struct SolverFailure : Error {
  using Error::Error;
};

struct CollisionDetected : Error {
  double time_s = 0;
  int follower_index = 0;
  CollisionDetected(double t, int follower)
      : Error("collision: train " + std::to_string(follower) +
              " closed the gap at t = " + std::to_string(t) + " s"),
        time_s(t), follower_index(follower) {}
};

struct NonTermination : Error {
  using Error::Error;
};

struct MismatchedScenarios : Error {
  using Error::Error;
};

struct EmptySegment : Error {
  using Error::Error;
};

}  // namespace vc
