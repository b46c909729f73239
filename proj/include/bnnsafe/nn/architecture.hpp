#pragma once

#include <array>

#include "bnnsafe/nn/network.hpp"

namespace bnnsafe::nn {

inline constexpr int kImageRows = 48;
inline constexpr int kImageCols = 64;
inline constexpr int kFeatureWidth = 64;

// Dropout rates on the inputs of the first three head layers.
inline constexpr std::array<double, 3> kMcdDropoutRates{0.1, 0.08, 0.08};

// Number of leading layers forming the fixed feature extractor of
// default_network().
inline constexpr std::size_t kExtractorLayers = 9;

inline std::vector<LayerSpec> extractor_layers() {
  return {LayerSpec::conv(8, 5, 2),  LayerSpec::relu(), LayerSpec::conv(12, 5, 2), LayerSpec::relu(),
          LayerSpec::conv(16, 3, 2), LayerSpec::relu(), LayerSpec::flatten(),       LayerSpec::dense(kFeatureWidth),
          LayerSpec::relu()};
}

inline std::vector<LayerSpec> head_layers(int num_classes, std::array<double, 3> rates = {0.0, 0.0, 0.0}) {
  return {LayerSpec::dense(50, rates[0]), LayerSpec::relu(), LayerSpec::dense(30, rates[1]), LayerSpec::relu(),
          LayerSpec::dense(16, rates[2]), LayerSpec::relu(), LayerSpec::dense(num_classes)};
}

// Full image network: extractor followed by the head with MC-dropout rates.
inline NetworkSpec default_network(int num_classes = 20, std::array<double, 3> rates = kMcdDropoutRates) {
  NetworkSpec spec;
  spec.input_shape = {kImageRows, kImageCols, 1};
  spec.num_classes = num_classes;
  spec.layers = extractor_layers();
  for (auto& l : head_layers(num_classes, rates)) spec.layers.push_back(l);
  return spec;
}

// The head as a standalone network over extracted features (no dropout).
inline NetworkSpec head_network(int num_classes = 20, int feature_width = kFeatureWidth) {
  NetworkSpec spec;
  spec.input_shape = {feature_width};
  spec.num_classes = num_classes;
  spec.layers = head_layers(num_classes);
  return spec;
}

// Layers [begin, end) of `spec` as a standalone network with the given input.
inline NetworkSpec slice_network(const NetworkSpec& spec, std::size_t begin, Shape input_shape) {
  NetworkSpec out;
  out.input_shape = std::move(input_shape);
  out.num_classes = spec.num_classes;
  out.layers.assign(spec.layers.begin() + static_cast<std::ptrdiff_t>(begin), spec.layers.end());
  return out;
}

}  // namespace bnnsafe::nn
