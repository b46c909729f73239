#pragma once

#include <algorithm>
#include <cmath>

#include "bnnsafe/sim/geometry.hpp"

namespace bnnsafe::sim {

struct VehicleParams {
  double wheelbase = 2.7;
  double max_steer = 0.5236;  // rad at steering command 1
  double max_accel = 4.0;     // m/s^2, both directions
  double length = 4.0;
  double width = 1.8;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const VehicleState&) const = default;
};

inline Rect footprint(const VehicleState& s, const VehicleParams& p = {}) {
  return {s.position(), s.heading, p.length, p.width};
}

// Kinematic bicycle step. Position advances with the pre-step speed and
// heading; speed then moves toward `speed_cmd` by at most max_accel * dt.
inline VehicleState step(const VehicleState& s, double steering, double speed_cmd, double dt,
                         const VehicleParams& p = {}) {
  const double delta = std::clamp(steering, -1.0, 1.0) * p.max_steer;
  VehicleState n = s;
  n.x += s.speed * std::cos(s.heading) * dt;
  n.y += s.speed * std::sin(s.heading) * dt;
  n.heading = wrap_angle(s.heading + s.speed / p.wheelbase * std::tan(delta) * dt);
  const double target = std::max(0.0, speed_cmd);
  const double dv = p.max_accel * dt;
  if (std::abs(target - s.speed) <= dv * (1.0 + 1e-9))
    n.speed = target;
  else
    n.speed = s.speed + (target > s.speed ? dv : -dv);
  return n;
}

}  // namespace bnnsafe::sim
