#pragma once

#include <memory>

#include "bnnsafe/bayes/mcd.hpp"
#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/bayes/sampling.hpp"
#include "bnnsafe/sim/dataset.hpp"
#include "bnnsafe/sim/episode.hpp"
#include "bnnsafe/uncertainty.hpp"

namespace bnnsafe::harness {

// A trained controller: the fixed feature extractor (taken from an MC-dropout
// model) plus a posterior over the head.
struct BayesianController {
  bayes::McdPosterior extractor;
  bayes::Posterior posterior;
};

namespace detail {
struct ControllerState {
  ControllerState(BayesianController c, uq::ConfidenceConfig cfg)
      : model(std::move(c)), net(model.extractor.spec), sampler(model.posterior), confidence(cfg) {}
  BayesianController model;
  nn::CompiledNetwork net;
  bayes::HeadSampler sampler;
  uq::ConfidenceConfig confidence;
};
}  // namespace detail

// Steering from the predictive decision over `cfg.samples` weight draws, with
// the confidence report attached. Safe to call from concurrent episodes.
inline sim::Controller make_controller(BayesianController model, const uq::ConfidenceConfig& cfg) {
  bayes::validate(model.posterior);
  auto state = std::make_shared<const detail::ControllerState>(std::move(model), cfg);
  return [state](const sim::StepInput& in) {
    const auto features = bayes::extract_features(state->model.extractor, state->net, sim::to_tensor(in.observation));
    const auto pred = uq::predictive(state->sampler, features, state->confidence.samples, in.rng);
    const auto assessed = uq::assess(pred, state->confidence);
    return sim::ControlOutput{assessed.decision.steering, assessed.report};
  };
}

}  // namespace bnnsafe::harness
