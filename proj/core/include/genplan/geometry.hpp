#pragma once

#include <cmath>
#include <numbers>

namespace genplan {

// Planar pose in SE(2).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

// Maps a point expressed in the frame `origin` into the parent frame.
inline Point2 to_world(const Pose2& origin, double bx, double by) {
  const double c = std::cos(origin.heading);
  const double s = std::sin(origin.heading);
  return {origin.x + c * bx - s * by, origin.y + s * bx + c * by};
}

inline Pose2 to_world(const Pose2& origin, const Pose2& local) {
  const Point2 p = to_world(origin, local.x, local.y);
  return {p.x, p.y, origin.heading + local.heading};
}

// Inverse of to_world: expresses a parent-frame point in the frame `origin`.
inline Point2 to_body(const Pose2& origin, double wx, double wy) {
  const double c = std::cos(origin.heading);
  const double s = std::sin(origin.heading);
  const double dx = wx - origin.x;
  const double dy = wy - origin.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

inline Pose2 to_body(const Pose2& origin, const Pose2& world) {
  const Point2 p = to_body(origin, world.x, world.y);
  return {p.x, p.y, world.heading - origin.heading};
}

}  // namespace genplan
