#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/nn/adam.hpp"
#include "bnnsafe/nn/network.hpp"
#include "bnnsafe/rng.hpp"

namespace bnnsafe::bayes {

// Minibatch ADAM on cross-entropy with a fresh dropout mask per example.
// `epoch_loss`, when given, receives the mean training loss of each epoch.
inline McdPosterior train_mcd(const ImageDataset& data, const nn::NetworkSpec& spec, const McdConfig& cfg, Rng& rng,
                              std::size_t head_begin = nn::kExtractorLayers,
                              std::vector<double>* epoch_loss = nullptr) {
  if (data.empty()) throw std::invalid_argument("train_mcd: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw std::invalid_argument("train_mcd: invalid epochs / batch size");
  const nn::CompiledNetwork net(spec);
  if (head_begin >= spec.layers.size()) throw std::invalid_argument("train_mcd: head_begin out of range");

  McdPosterior post{spec, head_begin, nn::init_weights(net, rng)};
  auto adam = nn::AdamState::for_size(net.parameter_count(), cfg.learning_rate);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch_grad(net.parameter_count());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = data[order[b]];
        const auto mask = nn::sample_dropout_mask(net, rng);
        const auto lg = nn::backward(net, post.weights, ex.image, ex.label, &mask);
        total += lg.loss;
        for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i] += lg.grad[i];
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (double& g : batch_grad) g *= scale;
      nn::adam_step(adam, post.weights, batch_grad);
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(data.size()));
  }
  return post;
}

// Mask-free pass through the fixed extractor layers.
inline std::vector<double> extract_features(const McdPosterior& mcd, const nn::CompiledNetwork& net,
                                            const nn::Tensor& image) {
  if (image.shape() != mcd.spec.input_shape)
    throw std::invalid_argument("extract_features: image shape " + nn::to_string(image.shape()) +
                                " does not match network input " + nn::to_string(mcd.spec.input_shape));
  if (mcd.weights.size() != net.parameter_count())
    throw std::invalid_argument("extract_features: weight length mismatch");
  return nn::detail::run_layers(net, mcd.weights, image.data(), nullptr, 0, mcd.head_begin);
}

inline std::vector<double> extract_features(const McdPosterior& mcd, const nn::Tensor& image) {
  return extract_features(mcd, nn::CompiledNetwork(mcd.spec), image);
}

inline FeatureDataset extract_feature_dataset(const McdPosterior& mcd, const ImageDataset& data) {
  const nn::CompiledNetwork net(mcd.spec);
  FeatureDataset out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back({extract_features(mcd, net, ex.image), ex.label});
  return out;
}

// Fraction of examples whose mask-free argmax equals the label.
inline double training_accuracy(const McdPosterior& mcd, const ImageDataset& data) {
  if (data.empty()) return 0.0;
  const nn::CompiledNetwork net(mcd.spec);
  std::size_t hits = 0;
  for (const auto& ex : data) {
    const auto logits = nn::forward(net, mcd.weights, ex.image);
    const auto v = logits.values();
    const auto best = std::max_element(v.begin(), v.end()) - v.begin();
    if (best == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace bnnsafe::bayes
