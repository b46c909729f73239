#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "bnnsafe/sim/geometry.hpp"
#include "bnnsafe/sim/path.hpp"
#include "bnnsafe/sim/vehicle.hpp"
#include "bnnsafe/sim/weather.hpp"

namespace bnnsafe::sim {

enum class MapKind { straight_obstacle, roundabout_first_exit };

inline const char* to_string(MapKind k) {
  return k == MapKind::straight_obstacle ? "straight_obstacle" : "roundabout_first_exit";
}

inline MapKind map_kind_from_string(const std::string& s) {
  if (s == "straight_obstacle") return MapKind::straight_obstacle;
  if (s == "roundabout_first_exit") return MapKind::roundabout_first_exit;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

struct Disturbance {
  double lateral_jitter_std = 0.3;  // m, initial offset along the path normal
  double steering_noise_std = 0.02;
};

struct ScenarioConfig {
  MapKind kind = MapKind::straight_obstacle;
  Path centerline;
  double corridor_half_width = 1.5;
  std::optional<Rect> obstacle;
  double nominal_speed = 8.0;
  int horizon = 300;
  double dt = 0.05;
  Weather weather = Weather::clear;
  std::optional<WeatherModel> custom_weather;  // replaces the preset when set
  Disturbance disturbance;
  VehicleParams vehicle;

  Pose start() const { return centerline.at(0.0); }
  WeatherModel weather_model() const { return custom_weather ? *custom_weather : WeatherModel::preset(weather); }

  void validate() const {
    if (!(corridor_half_width > 0.0)) throw std::invalid_argument("corridor half width must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least one step");
    if (centerline.segments().empty()) throw std::invalid_argument("scenario has no centerline");
  }
};

// Gap between the vehicle's front bumper and the obstacle's near face at the
// start pose.
inline constexpr double kObstacleGap = 40.0;

// Straight road. With an obstacle (a stopped 4.0 x 1.8 m car) the reference
// path makes a 1.4 m lane shift to the left around it and back.
inline ScenarioConfig straight_obstacle(bool with_obstacle = true) {
  ScenarioConfig sc;
  sc.kind = MapKind::straight_obstacle;
  Path path(Pose{{0.0, 0.0}, 0.0});
  if (with_obstacle) {
    constexpr double shift = 1.4, run = 15.0;
    const double turn = 2.0 * std::atan(shift / run);
    const double radius = run / (2.0 * std::sin(turn));
    path.line(18.0).arc(radius, turn).arc(radius, -turn).line(25.0).arc(radius, -turn).arc(radius, turn).line(27.0);
    const double front = 0.5 * sc.vehicle.length;
    const double obstacle_length = 4.0, obstacle_width = 1.8;
    sc.obstacle = Rect{{front + kObstacleGap + 0.5 * obstacle_length, -0.9}, 0.0, obstacle_length, obstacle_width};
  } else {
    path.line(100.0);
  }
  sc.centerline = std::move(path);
  return sc;
}

// Approach, a 90 degree right-hand arc of radius 18 m, then the exit road.
inline ScenarioConfig roundabout_first_exit() {
  ScenarioConfig sc;
  sc.kind = MapKind::roundabout_first_exit;
  Path path(Pose{{0.0, 0.0}, 0.0});
  path.line(10.0).arc(18.0, -0.5 * std::numbers::pi).line(20.0);
  sc.centerline = std::move(path);
  return sc;
}

inline ScenarioConfig make_scenario(MapKind kind) {
  return kind == MapKind::straight_obstacle ? straight_obstacle() : roundabout_first_exit();
}

}  // namespace bnnsafe::sim
