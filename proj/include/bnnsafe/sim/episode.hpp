#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnnsafe/rng.hpp"
#include "bnnsafe/sim/autopilot.hpp"
#include "bnnsafe/sim/render.hpp"
#include "bnnsafe/sim/safety.hpp"
#include "bnnsafe/sim/scenario.hpp"
#include "bnnsafe/sim/vehicle.hpp"
#include "bnnsafe/sim/weather.hpp"
#include "bnnsafe/uncertainty.hpp"

namespace bnnsafe::sim {

enum class Outcome { completed, collided, out_of_bounds, handover, controller_failure };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::completed: return "completed";
    case Outcome::collided: return "collided";
    case Outcome::out_of_bounds: return "out_of_bounds";
    case Outcome::handover: return "handover";
    case Outcome::controller_failure: return "controller_failure";
  }
  return "?";
}

// Safe for probabilistic-safety purposes: no violation over the run. A
// handover counts as safe when the stop completed without a violation.
inline bool is_safe_outcome(Outcome o) { return o == Outcome::completed || o == Outcome::handover; }

struct ControlOutput {
  double steering = 0.0;
  std::optional<uq::ConfidenceReport> report;
};

struct StepInput {
  const Observation& observation;
  const VehicleState& state;
  const ScenarioConfig& scenario;
  Rng& rng;
};

using Controller = std::function<ControlOutput(const StepInput&)>;

inline Controller autopilot_controller() {
  return [](const StepInput& in) { return ControlOutput{autopilot(in.state, in.scenario), std::nullopt}; };
}

struct MonitorPolicy {
  uq::WarningThresholds thresholds;
  double slow_factor = 0.5;
};

struct EpisodeRecord {
  int step = 0;
  VehicleState state;
  std::optional<double> steering;  // absent on the terminal record
  double speed_cmd = 0.0;
  std::optional<uq::ConfidenceReport> report;
  uq::Warning warning = uq::Warning::none;
  std::uint64_t observation_hash = 0;

  bool operator==(const EpisodeRecord& o) const {
    return step == o.step && state == o.state && steering == o.steering && speed_cmd == o.speed_cmd &&
           warning == o.warning && observation_hash == o.observation_hash && report.has_value() == o.report.has_value() &&
           (!report || (report->eta2 == o.report->eta2 && report->mutual_info == o.report->mutual_info &&
                        report->warning == o.report->warning && report->n_samples == o.report->n_samples));
  }
};

struct EpisodePath {
  std::vector<EpisodeRecord> records;
  Outcome outcome = Outcome::completed;
  bool monitored = false;
  std::string failure;  // controller error message, if any

  bool safe() const { return is_safe_outcome(outcome); }
  bool operator==(const EpisodePath&) const = default;
};

inline std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash(const Observation& o) { return fnv1a(o.pixels.data(), o.pixels.size()); }

// Optional hook receiving every frame fed to the controller.
using FrameSink = std::function<void(const Observation&, const EpisodeRecord&)>;

inline VehicleState initial_state(const ScenarioConfig& sc, Rng& disturbance) {
  const Pose p = sc.start();
  double offset = 0.0;
  if (sc.disturbance.lateral_jitter_std > 0.0)
    offset = std::normal_distribution<double>(0.0, sc.disturbance.lateral_jitter_std)(disturbance);
  const Vec2 left{-std::sin(p.heading), std::cos(p.heading)};
  const Vec2 pos = p.position + left * offset;
  return {pos.x, pos.y, p.heading, sc.nominal_speed};
}

// Closed-loop episode: render, weather, controller, optional monitor, step,
// safety check. Fully determined by (scenario, controller, seed).
inline EpisodePath run_episode(const ScenarioConfig& sc, const Controller& controller,
                               const std::optional<MonitorPolicy>& monitor, std::uint64_t seed,
                               const FrameSink& sink = {}) {
  sc.validate();
  if (monitor) monitor->thresholds.validate();
  Rng disturbance = stream_rng(seed, Stream::disturbance);
  Rng weather_rng = stream_rng(seed, Stream::weather);
  Rng controller_rng = stream_rng(seed, Stream::controller);
  const WeatherModel weather = sc.weather_model();
  std::normal_distribution<double> steer_noise(0.0, sc.disturbance.steering_noise_std > 0.0
                                                        ? sc.disturbance.steering_noise_std
                                                        : 1.0);
  EpisodePath path;
  path.monitored = monitor.has_value();
  VehicleState state = initial_state(sc, disturbance);
  const double end_s = sc.centerline.length();
  bool braking = false;

  for (int k = 0; k <= sc.horizon; ++k) {
    EpisodeRecord rec;
    rec.step = k;
    rec.state = state;
    const Violation v = check_state(state, sc);
    if (v != Violation::none) {
      path.records.push_back(rec);
      path.outcome = v == Violation::collision ? Outcome::collided : Outcome::out_of_bounds;
      return path;
    }
    if (braking && state.speed == 0.0) {
      path.records.push_back(rec);
      path.outcome = Outcome::handover;
      return path;
    }
    if (k == sc.horizon || sc.centerline.project(state.position()).s >= end_s) {
      path.records.push_back(rec);
      path.outcome = Outcome::completed;
      return path;
    }

    const Observation obs = apply_weather(render(state, sc), weather, weather_rng);
    rec.observation_hash = hash(obs);
    ControlOutput out;
    try {
      out = controller(StepInput{obs, state, sc, controller_rng});
    } catch (const std::exception& e) {
      path.records.push_back(rec);
      path.outcome = Outcome::controller_failure;
      path.failure = e.what();
      return path;
    }
    rec.steering = std::clamp(out.steering, -1.0, 1.0);
    rec.speed_cmd = braking ? 0.0 : sc.nominal_speed;
    if (monitor) {
      if (!out.report) {
        path.records.push_back(rec);
        path.outcome = Outcome::controller_failure;
        path.failure = "monitored controller returned no confidence report";
        return path;
      }
      rec.report = out.report;
      rec.warning = uq::classify_warning(out.report->eta2, out.report->mutual_info, monitor->thresholds);
      rec.report->warning = rec.warning;
      if (rec.warning == uq::Warning::w2) braking = true;
      if (braking)
        rec.speed_cmd = 0.0;
      else if (rec.warning != uq::Warning::none)
        rec.speed_cmd = monitor->slow_factor * sc.nominal_speed;
    }
    if (sink) sink(obs, rec);
    path.records.push_back(rec);

    double applied = *rec.steering;
    if (sc.disturbance.steering_noise_std > 0.0) applied += steer_noise(disturbance);
    state = step(state, applied, rec.speed_cmd, sc.dt, sc.vehicle);
  }
  path.outcome = Outcome::completed;
  return path;
}

}  // namespace bnnsafe::sim
