#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <utility>
#include <limits>

#include "bnnsafe/sim/scenario.hpp"
#include "bnnsafe/sim/vehicle.hpp"
#include "bnnsafe/sim/weather.hpp"

namespace bnnsafe::sim {

namespace shade {
inline constexpr std::uint8_t obstacle = 10;
inline constexpr std::uint8_t off_road = 40;
inline constexpr std::uint8_t road = 120;
inline constexpr std::uint8_t sky = 170;
inline constexpr std::uint8_t marking = 220;
}  // namespace shade

struct CameraModel {
  double height = 1.2;       // m above ground
  double pitch = 0.2;        // rad, downward
  double focal = 32.0;       // px (90 degree horizontal field of view)
  double marking_width = 0.2;  // m, straddling the corridor edge
  double obstacle_height = 1.5;
  double max_range = 150.0;
};

namespace detail {

// Ray directions in the vehicle frame (forward, left, up), one per pixel.
struct RayTable {
  std::array<std::array<double, 3>, kObsPixels> dir{};

  explicit RayTable(const CameraModel& cam) {
    const double cp = std::cos(cam.pitch), sp = std::sin(cam.pitch);
    for (int r = 0; r < kObsRows; ++r)
      for (int c = 0; c < kObsCols; ++c) {
        const double u = (c + 0.5 - 0.5 * kObsCols) / cam.focal;
        const double v = (r + 0.5 - 0.5 * kObsRows) / cam.focal;
        dir[static_cast<std::size_t>(r) * kObsCols + c] = {cp - v * sp, -u, -sp - v * cp};
      }
  }
};

// Entry distance of the ray into an upright box standing on the ground, or
// +inf when missed.
inline double ray_box(const std::array<double, 3>& origin, const std::array<double, 3>& d, const Rect& box,
                      double box_height, double ch, double sh) {
  const double ox = origin[0] - box.center.x, oy = origin[1] - box.center.y;
  const std::array<double, 3> o{ox * ch + oy * sh, -ox * sh + oy * ch, origin[2]};
  const std::array<double, 3> v{d[0] * ch + d[1] * sh, -d[0] * sh + d[1] * ch, d[2]};
  const std::array<double, 3> lo{-0.5 * box.length, -0.5 * box.width, 0.0};
  const std::array<double, 3> hi{0.5 * box.length, 0.5 * box.width, box_height};
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (v[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (lo[a] - o[a]) / v[a], tb = (hi[a] - o[a]) / v[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0;
}

}  // namespace detail

// Pinhole view from the front bumper looking along the heading. Pure
// function of the vehicle pose relative to the scene.
inline Observation render(const VehicleState& s, const ScenarioConfig& sc, const CameraModel& cam = {}) {
  static const detail::RayTable default_rays{CameraModel{}};
  const bool default_cam = cam.height == CameraModel{}.height && cam.pitch == CameraModel{}.pitch &&
                           cam.focal == CameraModel{}.focal;
  const detail::RayTable* rays = &default_rays;
  std::unique_ptr<detail::RayTable> custom;
  if (!default_cam) {
    custom = std::make_unique<detail::RayTable>(cam);
    rays = custom.get();
  }

  const double ch = std::cos(s.heading), sh = std::sin(s.heading);
  const double front = 0.5 * sc.vehicle.length;
  const std::array<double, 3> origin{s.x + front * ch, s.y + front * sh, cam.height};
  const double half = sc.corridor_half_width;
  const double mark = 0.5 * cam.marking_width;

  const double box_c = sc.obstacle ? std::cos(sc.obstacle->heading) : 1.0;
  const double box_s = sc.obstacle ? std::sin(sc.obstacle->heading) : 0.0;

  // Bounding sphere of the obstacle for cheap ray rejection.
  std::array<double, 3> sphere{};
  double sphere_r2 = 0.0;
  if (sc.obstacle) {
    const auto& b = *sc.obstacle;
    sphere = {b.center.x - origin[0], b.center.y - origin[1], 0.5 * cam.obstacle_height - origin[2]};
    sphere_r2 = 0.25 * (b.length * b.length + b.width * b.width + cam.obstacle_height * cam.obstacle_height);
  }

  Observation img;
  for (std::size_t i = 0; i < kObsPixels; ++i) {
    const auto& rd = rays->dir[i];
    const std::array<double, 3> d{rd[0] * ch - rd[1] * sh, rd[0] * sh + rd[1] * ch, rd[2]};
    double t_ground = std::numeric_limits<double>::infinity();
    if (d[2] < 0.0) t_ground = cam.height / -d[2];
    bool near_box = false;
    if (sc.obstacle) {
      const double dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
      const double proj = sphere[0] * d[0] + sphere[1] * d[1] + sphere[2] * d[2];
      const double c2 = sphere[0] * sphere[0] + sphere[1] * sphere[1] + sphere[2] * sphere[2];
      near_box = c2 <= sphere_r2 || (proj > 0.0 && c2 - proj * proj / dd <= sphere_r2);
    }
    if (near_box) {
      const double t_box = detail::ray_box(origin, d, *sc.obstacle, cam.obstacle_height, box_c, box_s);
      if (t_box < t_ground && t_box * std::sqrt(d[0] * d[0] + d[1] * d[1]) <= cam.max_range) {
        img.pixels[i] = shade::obstacle;
        continue;
      }
    }
    if (!std::isfinite(t_ground) || t_ground * std::sqrt(d[0] * d[0] + d[1] * d[1]) > cam.max_range) {
      img.pixels[i] = shade::sky;
      continue;
    }
    const Vec2 g{origin[0] + t_ground * d[0], origin[1] + t_ground * d[1]};
    const double dist = sc.centerline.distance(g);
    if (dist < half - mark)
      img.pixels[i] = shade::road;
    else if (dist <= half + mark)
      img.pixels[i] = shade::marking;
    else
      img.pixels[i] = shade::off_road;
  }
  return img;
}

}  // namespace bnnsafe::sim
