#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bnnsafe/nn/architecture.hpp"
#include "bnnsafe/nn/network.hpp"

namespace bnnsafe::bayes {

using nn::WeightVector;

struct LabeledImage {
  nn::Tensor image;
  int label = 0;
};
using ImageDataset = std::vector<LabeledImage>;

struct LabeledFeatures {
  std::vector<double> features;
  int label = 0;
};
using FeatureDataset = std::vector<LabeledFeatures>;

// Zero-mean Gaussian prior with one scale per parameterized layer. A single
// entry applies to every layer.
struct Prior {
  std::vector<double> layer_sigma{1.0};

  // Per-parameter standard deviations for `net`.
  std::vector<double> expand(const nn::CompiledNetwork& net) const {
    std::size_t n_param_layers = 0;
    for (const auto& p : net.layers())
      if (p.weight_count > 0) ++n_param_layers;
    if (layer_sigma.size() != 1 && layer_sigma.size() != n_param_layers)
      throw std::invalid_argument("prior has " + std::to_string(layer_sigma.size()) + " scales for " +
                                  std::to_string(n_param_layers) + " parameterized layers");
    std::vector<double> out;
    out.reserve(net.parameter_count());
    std::size_t k = 0;
    for (const auto& p : net.layers()) {
      if (p.weight_count == 0) continue;
      const double s = layer_sigma.size() == 1 ? layer_sigma[0] : layer_sigma[k];
      if (!(s > 0.0)) throw std::invalid_argument("prior scale must be positive");
      out.insert(out.end(), p.weight_count + p.bias_count, s);
      ++k;
    }
    return out;
  }
};

// MC dropout: the full image network with dropout on the head layers.
struct McdPosterior {
  nn::NetworkSpec spec;
  std::size_t head_begin = nn::kExtractorLayers;
  WeightVector weights;

  std::vector<double> rates() const {
    std::vector<double> r;
    for (std::size_t i = head_begin; i < spec.layers.size(); ++i)
      if (spec.layers[i].kind == nn::LayerKind::fully_connected && spec.layers[i].dropout_rate > 0.0)
        r.push_back(spec.layers[i].dropout_rate);
    return r;
  }
  int feature_width() const {
    return static_cast<int>(nn::CompiledNetwork(spec).layers().at(head_begin).in_size);
  }
  // Head layers as a standalone network over features (keeps dropout rates).
  nn::NetworkSpec head_spec() const { return nn::slice_network(spec, head_begin, {feature_width()}); }
  WeightVector head_weights() const {
    const std::size_t off = nn::CompiledNetwork(spec).parameter_offset(head_begin);
    return WeightVector(weights.begin() + static_cast<std::ptrdiff_t>(off), weights.end());
  }
  WeightVector extractor_weights() const {
    const std::size_t off = nn::CompiledNetwork(spec).parameter_offset(head_begin);
    return WeightVector(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(off));
  }

  bool operator==(const McdPosterior&) const = default;
};

// Mean-field Gaussian over head weights, w = mu + exp(rho) * zeta.
struct ViPosterior {
  nn::NetworkSpec head;
  WeightVector mu;
  WeightVector rho;

  bool operator==(const ViPosterior&) const = default;
};

struct HmcPosterior {
  nn::NetworkSpec head;
  std::vector<WeightVector> samples;

  bool operator==(const HmcPosterior&) const = default;
};

using Posterior = std::variant<McdPosterior, ViPosterior, HmcPosterior>;

inline const char* method_name(const Posterior& p) {
  switch (p.index()) {
    case 0: return "mcd";
    case 1: return "vi";
    default: return "hmc";
  }
}

inline void validate(const Posterior& post) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, McdPosterior>) {
          nn::CompiledNetwork net(p.spec);
          if (p.weights.size() != net.parameter_count())
            throw std::invalid_argument("MCD weights do not match network parameter count");
          if (p.head_begin >= p.spec.layers.size()) throw std::invalid_argument("MCD head_begin out of range");
        } else if constexpr (std::is_same_v<T, ViPosterior>) {
          const std::size_t n = nn::parameter_count(p.head);
          if (p.mu.size() != n || p.rho.size() != n)
            throw std::invalid_argument("VI mean / log-std lengths do not match head parameter count");
        } else {
          if (p.samples.empty()) throw std::invalid_argument("HMC posterior has no samples");
          const std::size_t n = nn::parameter_count(p.head);
          for (const auto& s : p.samples)
            if (s.size() != n) throw std::invalid_argument("HMC sample length does not match head parameter count");
        }
      },
      post);
}

// Network evaluated on features by the posterior's weight samples.
inline nn::NetworkSpec head_spec(const Posterior& post) {
  return std::visit(
      [](const auto& p) -> nn::NetworkSpec {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, McdPosterior>) return p.head_spec();
        else return p.head;
      },
      post);
}

struct HmcConfig {
  double step_size = 0.01;
  int leapfrog_steps = 10;
  int burn_in = 500;
  int samples = 1000;
  int thinning = 2;

  void validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("HMC step size must be positive");
    if (leapfrog_steps < 1) throw std::invalid_argument("HMC needs at least one leapfrog step");
    if (burn_in < 0 || samples < 1 || thinning < 1) throw std::invalid_argument("HMC sample counts invalid");
  }
};

struct ViConfig {
  int iterations = 2000;
  int mc_samples = 1;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double init_log_std = -5.0;

  void validate() const {
    if (iterations < 0 || mc_samples < 1) throw std::invalid_argument("VI iteration / sample counts invalid");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("VI learning rate must be positive");
  }
};

struct McdConfig {
  int epochs = 25;
  int batch_size = 16;
  double learning_rate = 1e-4;
};

}  // namespace bnnsafe::bayes
