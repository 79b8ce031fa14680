#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "genplan/geometry.hpp"

namespace genplan {

// Every primitive spans the same fixed duration, traversed at constant speed.
inline constexpr double kPrimitiveDuration = 2.0;
inline constexpr double kDefaultKappaMax = 4.0;
// Curvatures below this magnitude use the straight-segment formula.
inline constexpr double kStraightCurvature = 1e-9;

// Four-parameter motion primitive: total arc length and the curvatures of
// three consecutive arcs of length alpha / 3 each.
struct PrimitiveParams {
  double alpha = 1.0;   // m
  double kappa1 = 0.0;  // 1/m
  double kappa2 = 0.0;
  double kappa3 = 0.0;

  std::array<double, 4> to_array() const { return {alpha, kappa1, kappa2, kappa3}; }
  static PrimitiveParams from_array(const std::array<double, 4>& v) {
    return {v[0], v[1], v[2], v[3]};
  }
  double kappa(int arc) const { return arc == 0 ? kappa1 : (arc == 1 ? kappa2 : kappa3); }

  friend bool operator==(const PrimitiveParams&, const PrimitiveParams&) = default;
};

// Throws ParameterError unless alpha > 0 and every field is finite.
void validate(const PrimitiveParams& theta);

struct PoseSample {
  double t = 0.0;  // s
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// Time-stamped planar trajectory. Timestamps are strictly increasing.
struct PosePath {
  std::vector<PoseSample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
  const PoseSample& front() const { return samples.front(); }
  const PoseSample& back() const { return samples.back(); }
  // Sum of straight-line distances between consecutive samples.
  double polyline_length() const;
};

// Pose reached after travelling arc length `s` along the primitive from the
// body-frame origin. `s` is clamped to [0, alpha].
Pose2 pose_at_arclength(const PrimitiveParams& theta, double s);

// Samples p(theta) uniformly in arc length. Sample k sits at arc length
// alpha * k / (n - 1) and time T * k / (n - 1).
PosePath reconstruct(const PrimitiveParams& theta, std::size_t n_samples);

// Re-expresses a path in the frame `origin`, shifting time so it starts at 0.
PosePath transform_to_world(const PosePath& body_path, const Pose2& origin);

struct FitOptions {
  double kappa_max = kDefaultKappaMax;
  int max_iterations = 100;
  double cost_tolerance = 1e-10;
  double jacobian_step = 1e-5;
};

struct FitResult {
  PrimitiveParams params;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;          // sum of squared position residuals, m^2
  double residual_rms = 0.0;  // RMS Euclidean position error, m
};

// Sum of squared position residuals between p(theta) evaluated at the path's
// timestamps and the path (already in its own start frame).
double fit_cost(const PrimitiveParams& theta, const PosePath& normalized_path);

// Gauss-Newton least-squares fit of theta to path positions. The path is
// first rigidly moved so its initial pose is the origin. Throws FitError on
// degenerate input; on non-convergence returns the best iterate with
// `converged == false`.
FitResult fit_params(const PosePath& path, const FitOptions& options = {});

// Cuts a long log into windows of `window` seconds every `stride` seconds,
// each re-expressed in the frame of its first pose with time starting at 0.
// stride <= 0 means stride = window.
std::vector<PosePath> slice_log(const PosePath& log, double window, double stride = 0.0);

// Primitive dataset CSV: optional '#' comment lines, a header row
// "alpha,kappa1,kappa2,kappa3", then one row per primitive with 9 significant
// digits.
void write_primitives_csv(std::ostream& out, const std::vector<PrimitiveParams>& data,
                          const std::string& comment = {});
std::vector<PrimitiveParams> read_primitives_csv(std::istream& in);

}  // namespace genplan
