#pragma once

#include <numbers>

#include "genplan/arc_primitives.hpp"
#include "genplan/geometry.hpp"

namespace genplan {

// Kinematic bicycle state.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;    // m/s, never negative
  double phi = 0.0;  // heading, rad (not wrapped)
  double psi = 0.0;  // steering angle, rad

  Pose2 pose() const { return {x, y, phi}; }
  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct ControlInput {
  double accel = 0.0;       // m/s^2
  double steer_rate = 0.0;  // rad/s

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct VehicleLimits {
  double psi_max = 0.45;
  double accel_max = 5.0;
  double steer_rate_max = 4.0 * std::numbers::pi;
  double speed_max = 3.0;  // m/s
  // Divides v * tan(psi) in the heading rate. 1.0 reproduces the plain
  // phi' = v tan(psi) model.
  double wheelbase = 1.0;
};

ControlInput clamp_control(ControlInput u, const VehicleLimits& limits);

// One RK4 step of the bicycle model with clamped controls; afterwards v is
// clamped to [0, speed_max] and psi to [-psi_max, psi_max].
VehicleState step(const VehicleState& s, ControlInput u, double dt, const VehicleLimits& limits = {});

// Forward-Euler variant used inside MPPI rollouts; same clamping rules.
VehicleState euler_step(const VehicleState& s, ControlInput u, double dt,
                        const VehicleLimits& limits = {});

struct PidGains {
  double kv = 4.0;    // speed error -> acceleration
  double kct = 82.0;  // cross-track error -> steering rate
  double kh = 77.0;   // heading error -> steering rate
  double kd = 24.0;   // steering deviation from feed-forward -> steering rate
};

// Reference sampled from a body-frame plan at time t and mapped to world.
struct TrackingReference {
  Pose2 pose;
  double speed = 0.0;      // m/s along the plan
  double curvature = 0.0;  // 1/m, signed
};

TrackingReference reference_at(const PosePath& body_plan, const Pose2& plan_origin, double t);

// Closest point of a body-frame plan (anchored at `plan_origin`) to the
// world point (x, y). The final segment is extended along its tangent.
struct PathProjection {
  Pose2 pose;              // world frame
  double curvature = 0.0;  // of the segment holding the closest point
  std::size_t segment = 0;
};

PathProjection project_onto_path(const PosePath& body_plan, const Pose2& plan_origin, double x, double y);

// Tracks a body-frame plan anchored at `plan_origin`:
//   accel      = kv * (v_ref - v)
//   steer_rate = kct * e_ct + kh * e_h - kd * (psi - psi_ff)
// v_ref is the plan speed at t_since_plan. The lateral terms use the closest
// point of the plan: e_ct is its offset seen from the vehicle (positive when
// the path lies to the vehicle's left), e_h the wrapped heading error and
// psi_ff = atan(wheelbase * kappa) with the path curvature there. Both
// outputs are clamped to the vehicle limits.
ControlInput pid_track(const VehicleState& state, const PosePath& body_plan, const Pose2& plan_origin,
                       double t_since_plan, const PidGains& gains = {},
                       const VehicleLimits& limits = {});

}  // namespace genplan
