#pragma once

#include "bnnsafe/sim/geometry.hpp"
#include "bnnsafe/sim/scenario.hpp"
#include "bnnsafe/sim/vehicle.hpp"

namespace bnnsafe::sim {

enum class Violation { none, collision, out_of_bounds };

// Collision takes precedence when both conditions hold.
inline Violation check_state(const VehicleState& s, const ScenarioConfig& sc) {
  if (sc.obstacle && overlaps(footprint(s, sc.vehicle), *sc.obstacle)) return Violation::collision;
  if (sc.centerline.project(s.position()).distance > sc.corridor_half_width) return Violation::out_of_bounds;
  return Violation::none;
}

inline bool is_safe(const VehicleState& s, const ScenarioConfig& sc) { return check_state(s, sc) == Violation::none; }

}  // namespace bnnsafe::sim
