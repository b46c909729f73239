#pragma once

// Run configuration: a flat JSON object whose keys mirror the fields below.
// Unknown keys are rejected. Command-line flags are applied afterwards.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/harness/model_file.hpp"
#include "bnnsafe/sim/scenario.hpp"
#include "bnnsafe/statcheck.hpp"
#include "bnnsafe/uncertainty.hpp"

namespace bnnsafe::harness {

struct RunConfig {
  // scenario
  std::string scenario = "straight_obstacle";
  double corridor_half_width = 1.5;
  double nominal_speed = 8.0;
  int horizon = 300;
  double dt = 0.05;
  double lateral_jitter_std = 0.3;
  double steering_noise_std = 0.02;
  std::vector<std::string> weathers{"clear", "cloudy", "wet", "rain"};

  // decisions and monitor
  int num_classes = 20;
  double epsilon = 0.1;
  double delta1 = 0.7;
  double delta2 = 0.6;
  double mi_threshold = 0.45;
  int realtime_samples = 32;
  double slow_factor = 0.5;

  // statistical precision
  double theta = 0.05;
  double gamma = 0.05;

  // training
  std::string method = "mcd";
  std::uint64_t seed = 1;
  int collect_episodes = 20;
  int mcd_epochs = 25;
  int mcd_batch_size = 16;
  double mcd_learning_rate = 1e-4;
  int vi_iterations = 2000;
  int vi_mc_samples = 1;
  double vi_learning_rate = 1e-3;
  double vi_init_log_std = -5.0;
  double hmc_step_size = 0.01;
  int hmc_leapfrog_steps = 10;
  int hmc_burn_in = 500;
  int hmc_samples = 1000;
  int hmc_thinning = 2;
  double prior_sigma = 1.0;

  // execution and files
  int jobs = 1;
  std::string dataset = "dataset";
  std::string model = "model.json";
  std::string mcd_model;
  std::string output = "results";

  void validate() const;
  sim::ScenarioConfig scenario_config(sim::Weather weather = sim::Weather::clear) const;
  std::vector<sim::Weather> weather_grid() const;
  uq::ConfidenceConfig confidence() const;
  sim::MonitorPolicy monitor() const;
  stat::PrecisionSpec precision() const { return {theta, gamma}; }
  bayes::McdConfig mcd_config() const { return {mcd_epochs, mcd_batch_size, mcd_learning_rate}; }
  bayes::ViConfig vi_config() const { return {vi_iterations, vi_mc_samples, vi_learning_rate, seed, vi_init_log_std}; }
  bayes::HmcConfig hmc_config() const {
    return {hmc_step_size, hmc_leapfrog_steps, hmc_burn_in, hmc_samples, hmc_thinning};
  }
};

namespace detail {

using FieldRef = std::variant<double*, int*, std::uint64_t*, std::string*, std::vector<std::string>*>;

template <class Cfg>
std::vector<std::pair<const char*, FieldRef>> fields(Cfg& c) {
  return {{"scenario", &c.scenario},
          {"corridor_half_width", &c.corridor_half_width},
          {"nominal_speed", &c.nominal_speed},
          {"horizon", &c.horizon},
          {"dt", &c.dt},
          {"lateral_jitter_std", &c.lateral_jitter_std},
          {"steering_noise_std", &c.steering_noise_std},
          {"weathers", &c.weathers},
          {"num_classes", &c.num_classes},
          {"epsilon", &c.epsilon},
          {"delta1", &c.delta1},
          {"delta2", &c.delta2},
          {"mi_threshold", &c.mi_threshold},
          {"realtime_samples", &c.realtime_samples},
          {"slow_factor", &c.slow_factor},
          {"theta", &c.theta},
          {"gamma", &c.gamma},
          {"method", &c.method},
          {"seed", &c.seed},
          {"collect_episodes", &c.collect_episodes},
          {"mcd_epochs", &c.mcd_epochs},
          {"mcd_batch_size", &c.mcd_batch_size},
          {"mcd_learning_rate", &c.mcd_learning_rate},
          {"vi_iterations", &c.vi_iterations},
          {"vi_mc_samples", &c.vi_mc_samples},
          {"vi_learning_rate", &c.vi_learning_rate},
          {"vi_init_log_std", &c.vi_init_log_std},
          {"hmc_step_size", &c.hmc_step_size},
          {"hmc_leapfrog_steps", &c.hmc_leapfrog_steps},
          {"hmc_burn_in", &c.hmc_burn_in},
          {"hmc_samples", &c.hmc_samples},
          {"hmc_thinning", &c.hmc_thinning},
          {"prior_sigma", &c.prior_sigma},
          {"jobs", &c.jobs},
          {"dataset", &c.dataset},
          {"model", &c.model},
          {"mcd_model", &c.mcd_model},
          {"output", &c.output}};
}

}  // namespace detail

inline json config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  json j = json::object();
  for (auto& [name, ref] : detail::fields(copy)) std::visit([&, n = name](auto* p) { j[n] = *p; }, ref);
  return j;
}

inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig cfg;
  auto table = detail::fields(cfg);
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(table.begin(), table.end(), [&, k = key](const auto& f) { return k == f.first; });
    if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    try {
      std::visit([&, v = &value](auto* p) { *p = v->template get<std::remove_pointer_t<decltype(p)>>(); }, it->second);
    } catch (const json::exception&) {
      throw std::invalid_argument("config key '" + key + "' has the wrong type");
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(json::parse(ss.str()));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config is not valid JSON: " + std::string(e.what()));
  }
}

inline void RunConfig::validate() const {
  sim::map_kind_from_string(scenario);
  weather_grid();
  if (method != "mcd" && method != "vi" && method != "hmc")
    throw std::invalid_argument("method must be one of mcd, vi, hmc");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
  confidence().thresholds.validate();
  if (realtime_samples < 1) throw std::invalid_argument("realtime_samples must be positive");
  if (!(slow_factor > 0.0 && slow_factor <= 1.0)) throw std::invalid_argument("slow_factor must lie in (0, 1]");
  precision().validate();
  if (collect_episodes < 1) throw std::invalid_argument("collect_episodes must be positive");
  if (mcd_epochs < 0 || mcd_batch_size < 1 || !(mcd_learning_rate > 0.0))
    throw std::invalid_argument("invalid MC dropout training settings");
  vi_config().validate();
  hmc_config().validate();
  if (!(prior_sigma > 0.0)) throw std::invalid_argument("prior_sigma must be positive");
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
  if (!(nominal_speed > 0.0)) throw std::invalid_argument("nominal_speed must be positive");
  if (!(lateral_jitter_std >= 0.0 && steering_noise_std >= 0.0))
    throw std::invalid_argument("disturbance scales must be non-negative");
  scenario_config().validate();
}

inline std::vector<sim::Weather> RunConfig::weather_grid() const {
  if (weathers.empty()) throw std::invalid_argument("weather list is empty");
  std::vector<sim::Weather> out;
  for (const auto& w : weathers) out.push_back(sim::weather_from_string(w));
  return out;
}

inline sim::ScenarioConfig RunConfig::scenario_config(sim::Weather weather) const {
  auto sc = sim::make_scenario(sim::map_kind_from_string(scenario));
  sc.corridor_half_width = corridor_half_width;
  sc.nominal_speed = nominal_speed;
  sc.horizon = horizon;
  sc.dt = dt;
  sc.disturbance = {lateral_jitter_std, steering_noise_std};
  sc.weather = weather;
  return sc;
}

inline uq::ConfidenceConfig RunConfig::confidence() const {
  uq::ConfidenceConfig c;
  c.bins = uq::Binning{num_classes, -1.0, 1.0};
  c.epsilon = epsilon;
  c.samples = realtime_samples;
  c.thresholds = {delta1, delta2, mi_threshold};
  return c;
}

inline sim::MonitorPolicy RunConfig::monitor() const { return {confidence().thresholds, slow_factor}; }

}  // namespace bnnsafe::harness
