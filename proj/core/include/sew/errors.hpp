#pragma once

#include <stdexcept>
#include <string>

namespace sew {

// Operation input is structurally valid but mathematically degenerate
// (zero-energy spectrum, zero residual variance, ...).
struct DegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Least-squares spline fit cannot proceed; carries the offending knot interval.
struct FitError : std::runtime_error {
  FitError(const std::string& what, int interval_index, double begin, double end)
      : std::runtime_error(what), interval_index(interval_index), interval_begin(begin), interval_end(end) {}
  int interval_index;
  double interval_begin;
  double interval_end;
};

// Root bracketing failed: no sign change over the supplied interval.
struct BracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reprojected point fell behind the camera.
struct CheiralityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fusion problem assembly failed (empty tracks, IMU gaps, coverage holes).
struct BuildError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver failed in a way that has no recovery (non-finite cost at start).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sew
