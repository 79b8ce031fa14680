#include "genplan/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "genplan/errors.hpp"

namespace genplan {
namespace {

struct Deriv {
  double x, y, v, phi, psi;
};

Deriv dynamics(const VehicleState& s, const ControlInput& u, double wheelbase) {
  return {s.v * std::cos(s.phi), s.v * std::sin(s.phi), u.accel, s.v * std::tan(s.psi) / wheelbase,
          u.steer_rate};
}

VehicleState offset(const VehicleState& s, const Deriv& d, double h) {
  return {s.x + h * d.x, s.y + h * d.y, s.v + h * d.v, s.phi + h * d.phi, s.psi + h * d.psi};
}

VehicleState sanitize(VehicleState s, const VehicleLimits& limits) {
  s.v = std::clamp(s.v, 0.0, limits.speed_max);
  s.psi = std::clamp(s.psi, -limits.psi_max, limits.psi_max);
  return s;
}

}  // namespace

ControlInput clamp_control(ControlInput u, const VehicleLimits& limits) {
  u.accel = std::clamp(u.accel, -limits.accel_max, limits.accel_max);
  u.steer_rate = std::clamp(u.steer_rate, -limits.steer_rate_max, limits.steer_rate_max);
  return u;
}

VehicleState step(const VehicleState& s, ControlInput u, double dt, const VehicleLimits& limits) {
  u = clamp_control(u, limits);
  const double L = limits.wheelbase;
  const Deriv k1 = dynamics(s, u, L);
  const Deriv k2 = dynamics(offset(s, k1, 0.5 * dt), u, L);
  const Deriv k3 = dynamics(offset(s, k2, 0.5 * dt), u, L);
  const Deriv k4 = dynamics(offset(s, k3, dt), u, L);
  const double w = dt / 6.0;
  VehicleState out{
      s.x + w * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
      s.y + w * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
      s.v + w * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
      s.phi + w * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
      s.psi + w * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
  };
  return sanitize(out, limits);
}

VehicleState euler_step(const VehicleState& s, ControlInput u, double dt, const VehicleLimits& limits) {
  u = clamp_control(u, limits);
  return sanitize(offset(s, dynamics(s, u, limits.wheelbase), dt), limits);
}

TrackingReference reference_at(const PosePath& plan, const Pose2& origin, double t) {
  if (plan.size() < 2) throw ParameterError("tracking reference needs a plan with >= 2 samples");
  const auto& s = plan.samples;
  t = std::clamp(t, s.front().t, s.back().t);
  auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const PoseSample& p) { return v < p.t; });
  std::size_t hi = static_cast<std::size_t>(std::distance(s.begin(), it));
  hi = std::clamp<std::size_t>(hi, 1, s.size() - 1);
  const std::size_t lo = hi - 1;
  const PoseSample& a = s[lo];
  const PoseSample& b = s[hi];
  const double dt = b.t - a.t;
  const double f = dt > 0.0 ? (t - a.t) / dt : 0.0;
  const Pose2 local{a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), a.heading + f * (b.heading - a.heading)};
  const double seg = std::hypot(b.x - a.x, b.y - a.y);
  TrackingReference ref;
  ref.pose = to_world(origin, local);
  ref.speed = dt > 0.0 ? seg / dt : 0.0;
  ref.curvature = seg > 1e-12 ? (b.heading - a.heading) / seg : 0.0;
  return ref;
}

PathProjection project_onto_path(const PosePath& plan, const Pose2& origin, double x, double y) {
  if (plan.size() < 2) throw ParameterError("path projection needs a plan with >= 2 samples");
  const Point2 p = to_body(origin, x, y);
  const auto& s = plan.samples;
  PathProjection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double ex = s[i + 1].x - s[i].x;
    const double ey = s[i + 1].y - s[i].y;
    const double len2 = ex * ex + ey * ey;
    double f = len2 > 0.0 ? ((p.x - s[i].x) * ex + (p.y - s[i].y) * ey) / len2 : 0.0;
    // The last segment extends past the end along its tangent.
    f = i + 2 == s.size() ? std::max(f, 0.0) : std::clamp(f, 0.0, 1.0);
    const double qx = s[i].x + f * ex;
    const double qy = s[i].y + f * ey;
    const double d2 = (p.x - qx) * (p.x - qx) + (p.y - qy) * (p.y - qy);
    if (d2 < best_d2) {
      best_d2 = d2;
      const double fh = std::min(f, 1.0);
      const double len = std::sqrt(len2);
      best.pose = to_world(origin, Pose2{qx, qy, s[i].heading + fh * (s[i + 1].heading - s[i].heading)});
      best.curvature = len > 1e-12 ? (s[i + 1].heading - s[i].heading) / len : 0.0;
      best.segment = i;
    }
  }
  return best;
}

ControlInput pid_track(const VehicleState& state, const PosePath& plan, const Pose2& origin,
                       double t_since_plan, const PidGains& g, const VehicleLimits& limits) {
  const TrackingReference ref = reference_at(plan, origin, t_since_plan);
  const PathProjection near = project_onto_path(plan, origin, state.x, state.y);
  const double dx = near.pose.x - state.x;
  const double dy = near.pose.y - state.y;
  const double cross_track = -std::sin(near.pose.heading) * dx + std::cos(near.pose.heading) * dy;
  const double heading_err = wrap_angle(near.pose.heading - state.phi);
  const double psi_ff = std::atan(limits.wheelbase * near.curvature);
  ControlInput u;
  u.accel = g.kv * (ref.speed - state.v);
  u.steer_rate = g.kct * cross_track + g.kh * heading_err - g.kd * (state.psi - psi_ff);
  return clamp_control(u, limits);
}

}  // namespace genplan
