#pragma once

#include <algorithm>
#include <cmath>

#include "bnnsafe/sim/scenario.hpp"
#include "bnnsafe/sim/vehicle.hpp"

namespace bnnsafe::sim {

inline constexpr double kLookahead = 6.0;

// Pure pursuit on the ground-truth centerline. Returns a steering command in
// [-1, 1]; positive steers left.
inline double autopilot(const VehicleState& s, const ScenarioConfig& sc, double lookahead = kLookahead) {
  const auto proj = sc.centerline.project(s.position());
  const Pose target = sc.centerline.at(proj.s + lookahead);
  const Vec2 d = target.position - s.position();
  const double ld = norm(d);
  if (ld == 0.0) return 0.0;
  const double alpha = wrap_angle(std::atan2(d.y, d.x) - s.heading);
  const double delta = std::atan(2.0 * sc.vehicle.wheelbase * std::sin(alpha) / ld);
  return std::clamp(delta / sc.vehicle.max_steer, -1.0, 1.0);
}

}  // namespace bnnsafe::sim
