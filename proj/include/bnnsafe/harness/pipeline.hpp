#pragma once

// The CLI stages as library calls.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnnsafe/bayes/hmc.hpp"
#include "bnnsafe/bayes/mcd.hpp"
#include "bnnsafe/bayes/vi.hpp"
#include "bnnsafe/harness/config.hpp"
#include "bnnsafe/harness/controller.hpp"
#include "bnnsafe/harness/dataset_file.hpp"
#include "bnnsafe/harness/model_file.hpp"
#include "bnnsafe/harness/report.hpp"
#include "bnnsafe/harness/trajectory_log.hpp"
#include "bnnsafe/nn/architecture.hpp"
#include "bnnsafe/sim/dataset.hpp"
#include "bnnsafe/statcheck.hpp"

namespace bnnsafe::harness {

// Raised for missing prerequisites that the caller should have supplied.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Returns the number of (image, label) pairs written.
inline std::size_t collect(const RunConfig& cfg) {
  cfg.validate();
  const auto sc = cfg.scenario_config();
  const auto points =
      sim::collect_dataset(sc, cfg.collect_episodes, cfg.seed, uq::Binning{cfg.num_classes, -1.0, 1.0});
  write_dataset(cfg.dataset, points, sc.kind, cfg.seed);
  return points.size();
}

inline ModelFile train_mcd_model(const RunConfig& cfg, const std::vector<DatasetRow>& rows) {
  const auto data = to_image_dataset(rows);
  Rng rng(cfg.seed);
  const auto spec = nn::default_network(cfg.num_classes);
  ModelFile m;
  m.extractor = bayes::train_mcd(data, spec, cfg.mcd_config(), rng);
  m.posterior = m.extractor;
  m.metadata = {cfg.seed, cfg.mcd_epochs, dataset_hash(rows), static_cast<long>(rows.size()),
                bayes::training_accuracy(m.extractor, data), std::nullopt};
  return m;
}

// VI and HMC heads start from the MC-dropout head weights of `base`.
inline ModelFile train_head_model(const RunConfig& cfg, const std::vector<DatasetRow>& rows, const ModelFile& base) {
  if (!std::holds_alternative<bayes::McdPosterior>(base.posterior))
    throw UsageError("--mcd-model must reference a model trained with method mcd");
  if (base.extractor.spec.num_classes != cfg.num_classes)
    throw std::invalid_argument("MC dropout model has a different number of classes");
  const auto images = to_image_dataset(rows);
  const auto features = bayes::extract_feature_dataset(base.extractor, images);
  const auto head = nn::head_network(cfg.num_classes, base.extractor.feature_width());
  const bayes::Prior prior{{cfg.prior_sigma}};
  const auto init = base.extractor.head_weights();

  ModelFile m;
  m.extractor = base.extractor;
  m.metadata = {cfg.seed, 0, dataset_hash(rows), static_cast<long>(rows.size()), base.metadata.training_accuracy,
                std::nullopt};
  if (cfg.method == "vi") {
    m.posterior = bayes::train_vi(features, head, prior, cfg.vi_config(), init);
    m.metadata.epochs = cfg.vi_iterations;
  } else {
    Rng rng(cfg.seed);
    double acceptance = 0.0;
    m.posterior = bayes::train_hmc(features, head, prior, cfg.hmc_config(), init, rng, &acceptance);
    m.metadata.epochs = cfg.hmc_samples;
    m.metadata.acceptance_rate = acceptance;
  }
  return m;
}

// Trains cfg.method on cfg.dataset and writes cfg.model.
inline ModelFile train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.method != "mcd" && cfg.mcd_model.empty())
    throw UsageError("method " + cfg.method + " needs --mcd-model (a trained MC dropout model)");
  const auto rows = read_dataset(cfg.dataset, cfg.num_classes);
  ModelFile m = cfg.method == "mcd" ? train_mcd_model(cfg, rows) : train_head_model(cfg, rows, load_model(cfg.mcd_model));
  save_model(cfg.model, m);
  return m;
}

struct SafetyCell {
  ReportCell cell;
  std::vector<sim::EpisodePath> paths;
};

inline SafetyCell evaluate_cell(const RunConfig& cfg, const ModelFile& model, const sim::Controller& controller,
                                sim::Weather weather, bool monitored) {
  const auto sc = cfg.scenario_config(weather);
  const std::optional<sim::MonitorPolicy> monitor =
      monitored ? std::optional<sim::MonitorPolicy>(cfg.monitor()) : std::nullopt;
  auto run = stat::estimate_probabilistic_safety(sc, controller, monitor, cfg.precision(), cfg.seed, cfg.jobs);
  SafetyCell out;
  out.cell = {bayes::method_name(model.posterior), cfg.scenario, sim::to_string(weather), monitored, run.estimate};
  out.paths = std::move(run.paths);
  return out;
}

inline std::string cell_file_stem(const ReportCell& c) {
  return c.method + "_" + c.scenario + "_" + c.weather + (c.monitored ? "_monitored" : "_unmonitored");
}

// Every weather in the grid, unmonitored and (optionally) monitored. Writes
// summary.json and one trajectory CSV per cell under cfg.output.
inline std::vector<ReportCell> eval_safety(const RunConfig& cfg, const ModelFile& model, bool with_monitor) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (!fs::is_directory(cfg.output)) throw std::runtime_error("cannot create output directory '" + cfg.output + "'");
  const auto controller = make_controller(model.controller(), cfg.confidence());
  std::vector<ReportCell> cells;
  for (const auto weather : cfg.weather_grid()) {
    for (const bool monitored : {false, true}) {
      if (monitored && !with_monitor) continue;
      auto result = evaluate_cell(cfg, model, controller, weather, monitored);
      std::ofstream log(fs::path(cfg.output) / ("trajectories_" + cell_file_stem(result.cell) + ".csv"),
                        std::ios::binary);
      if (!log) throw std::runtime_error("cannot write trajectory log in '" + cfg.output + "'");
      write_trajectory_log(log, result.paths, cfg.dt);
      cells.push_back(std::move(result.cell));
    }
  }
  write_file(fs::path(cfg.output) / "summary.json", summary_report(cells, config_to_json(cfg)));
  return cells;
}

// A single episode in the first weather of the grid.
inline sim::EpisodePath drive(const RunConfig& cfg, const ModelFile& model, std::uint64_t seed, bool monitored) {
  cfg.validate();
  const auto controller = make_controller(model.controller(), cfg.confidence());
  const auto sc = cfg.scenario_config(cfg.weather_grid().front());
  const std::optional<sim::MonitorPolicy> monitor =
      monitored ? std::optional<sim::MonitorPolicy>(cfg.monitor()) : std::nullopt;
  return sim::run_episode(sc, controller, monitor, seed);
}

}  // namespace bnnsafe::harness
