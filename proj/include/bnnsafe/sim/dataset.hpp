#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnnsafe/nn/tensor.hpp"
#include "bnnsafe/rng.hpp"
#include "bnnsafe/sim/episode.hpp"
#include "bnnsafe/uncertainty.hpp"

namespace bnnsafe::sim {

struct DataPoint {
  Observation image;
  int label = 0;
  double steering = 0.0;
  int episode = 0;
};

// Network input for a frame: intensities scaled to [0, 1].
inline nn::Tensor to_tensor(const Observation& obs) {
  std::vector<double> v(kObsPixels);
  for (std::size_t i = 0; i < kObsPixels; ++i) v[i] = obs.pixels[i] / 255.0;
  return nn::Tensor({kObsRows, kObsCols, 1}, std::move(v));
}

// Autopilot demonstrations in clear weather, one (frame, binned steering)
// pair per controlled step. Throws if a demonstration episode is unsafe.
inline std::vector<DataPoint> collect_dataset(ScenarioConfig sc, int episodes, std::uint64_t seed,
                                              const uq::Binning& bins = {}) {
  if (episodes < 1) throw std::invalid_argument("collect_dataset: need at least one episode");
  sc.weather = Weather::clear;
  sc.custom_weather.reset();
  std::vector<DataPoint> out;
  const Controller pilot = autopilot_controller();
  for (int e = 0; e < episodes; ++e) {
    const auto path = run_episode(sc, pilot, std::nullopt, derive_seed(seed, static_cast<std::uint64_t>(e)),
                                  [&](const Observation& obs, const EpisodeRecord& rec) {
                                    out.push_back({obs, bins.to_class(*rec.steering), *rec.steering, e});
                                  });
    if (!path.safe())
      throw std::runtime_error("autopilot demonstration episode " + std::to_string(e) + " ended " +
                               to_string(path.outcome));
  }
  return out;
}

}  // namespace bnnsafe::sim
