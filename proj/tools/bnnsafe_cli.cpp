// bnnsafe: dataset collection, training, safety evaluation, monitored driving
// and sample-size planning.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bnnsafe/harness/pipeline.hpp"

namespace {

using bnnsafe::harness::RunConfig;

// Flag values left unset keep whatever the config file (or the default) says.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario, method, dataset, model, mcd_model, output;
  std::optional<int> jobs, episodes, epochs, num_classes, samples;
  std::optional<double> theta, gamma, epsilon, delta1, delta2, mi_threshold;
  std::vector<std::string> weathers;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : bnnsafe::harness::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (scenario) cfg.scenario = *scenario;
    if (method) cfg.method = *method;
    if (dataset) cfg.dataset = *dataset;
    if (model) cfg.model = *model;
    if (mcd_model) cfg.mcd_model = *mcd_model;
    if (output) cfg.output = *output;
    if (jobs) cfg.jobs = *jobs;
    if (episodes) cfg.collect_episodes = *episodes;
    if (epochs) cfg.mcd_epochs = *epochs;
    if (num_classes) cfg.num_classes = *num_classes;
    if (samples) cfg.realtime_samples = *samples;
    if (theta) cfg.theta = *theta;
    if (gamma) cfg.gamma = *gamma;
    if (epsilon) cfg.epsilon = *epsilon;
    if (delta1) cfg.delta1 = *delta1;
    if (delta2) cfg.delta2 = *delta2;
    if (mi_threshold) cfg.mi_threshold = *mi_threshold;
    if (!weathers.empty()) cfg.weathers = weathers;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--scenario", o.scenario, "straight_obstacle | roundabout_first_exit");
  cmd->add_option("--num-classes", o.num_classes, "steering classes K");
  cmd->add_option("--jobs", o.jobs, "concurrent episode workers");
}

void add_monitor_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--model", o.model, "model file");
  cmd->add_option("--weather", o.weathers, "weather preset(s): clear cloudy wet rain");
  cmd->add_option("--samples", o.samples, "posterior samples per decision");
  cmd->add_option("--epsilon", o.epsilon, "decision tolerance");
  cmd->add_option("--delta1", o.delta1, "W1 threshold on eta2");
  cmd->add_option("--delta2", o.delta2, "W2 threshold on eta2");
  cmd->add_option("--mi-threshold", o.mi_threshold, "W0 threshold on mutual information");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian steering controllers with statistical safety checking"};
  app.require_subcommand(1);
  Overrides o;

  auto* collect = app.add_subcommand("collect", "record autopilot demonstrations as a dataset");
  add_common(collect, o);
  collect->add_option("--dataset", o.dataset, "output dataset directory");
  collect->add_option("--episodes", o.episodes, "demonstration episodes");

  auto* train = app.add_subcommand("train", "train an mcd, vi or hmc model");
  add_common(train, o);
  train->add_option("--dataset", o.dataset, "dataset directory");
  train->add_option("--method", o.method, "mcd | vi | hmc");
  train->add_option("--model", o.model, "output model file");
  train->add_option("--mcd-model", o.mcd_model, "MC dropout model providing the feature extractor (vi, hmc)");
  train->add_option("--epochs", o.epochs, "MC dropout epochs");

  bool with_monitor = false;
  auto* eval = app.add_subcommand("eval-safety", "estimate probabilistic safety over the weather grid");
  add_common(eval, o);
  add_monitor_options(eval, o);
  eval->add_option("--theta", o.theta, "absolute error bound");
  eval->add_option("--gamma", o.gamma, "failure probability");
  eval->add_option("--output", o.output, "directory for summary.json and trajectory logs");
  eval->add_flag("--with-monitor", with_monitor, "also evaluate with the runtime monitor");

  bool unmonitored = false;
  std::string log_path;
  auto* drive = app.add_subcommand("drive", "run one episode and write its trajectory log");
  add_common(drive, o);
  add_monitor_options(drive, o);
  drive->add_flag("--unmonitored", unmonitored, "disable the runtime monitor");
  drive->add_option("--log", log_path, "trajectory CSV (default: stdout)");

  double plan_theta = 0.05, plan_gamma = 0.05;
  auto* plan = app.add_subcommand("plan-samples", "print the Chernoff sample size");
  plan->add_option("--theta", plan_theta, "absolute error bound");
  plan->add_option("--gamma", plan_gamma, "failure probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    namespace h = bnnsafe::harness;
    if (plan->parsed()) {
      std::cout << bnnsafe::stat::chernoff_sample_size({plan_theta, plan_gamma}) << "\n";
      return 0;
    }
    const RunConfig cfg = o.resolve();
    if (collect->parsed()) {
      const auto n = h::collect(cfg);
      std::cout << n << " pairs written to " << cfg.dataset << "\n";
    } else if (train->parsed()) {
      const auto m = h::train(cfg);
      std::cout << "trained " << cfg.method << " on " << m.metadata.examples
                << " examples, training accuracy " << m.metadata.training_accuracy;
      if (m.metadata.acceptance_rate) std::cout << ", acceptance rate " << *m.metadata.acceptance_rate;
      std::cout << "\nmodel written to " << cfg.model << "\n";
    } else if (eval->parsed()) {
      const auto cells = h::eval_safety(cfg, h::load_model(cfg.model), with_monitor);
      for (const auto& c : cells)
        std::cout << c.weather << (c.monitored ? " monitored" : " unmonitored") << ": eta_hat "
                  << c.estimate.eta_hat << " over " << c.estimate.n << " episodes, autonomy "
                  << c.estimate.autonomy_rate << "\n";
    } else if (drive->parsed()) {
      const auto path = h::drive(cfg, h::load_model(cfg.model), cfg.seed, !unmonitored);
      if (log_path.empty()) {
        h::write_trajectory_log(std::cout, {path}, cfg.dt);
      } else {
        std::ofstream out(log_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write '" + log_path + "'");
        h::write_trajectory_log(out, {path}, cfg.dt);
      }
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
