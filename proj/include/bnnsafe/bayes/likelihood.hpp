#pragma once

#include <concepts>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/nn/network.hpp"

namespace bnnsafe::bayes {

struct ValueGradient {
  double value = 0.0;
  std::vector<double> grad;
};

// A differentiable log-likelihood log p(D | w) over a flat parameter vector.
template <class M>
concept LogLikelihood = requires(const M& m, std::span<const double> w) {
  { m.dimension() } -> std::convertible_to<std::size_t>;
  { m.log_likelihood(w) } -> std::same_as<ValueGradient>;
};

// Softmax likelihood of a network head over a feature dataset.
class HeadLikelihood {
 public:
  HeadLikelihood(const nn::NetworkSpec& head, const FeatureDataset& data) : net_(head), data_(&data) {
    for (const auto& ex : data) {
      if (ex.features.size() != net_.input_size())
        throw std::invalid_argument("feature dimension does not match head input");
      if (ex.label < 0 || ex.label >= head.num_classes) throw std::invalid_argument("feature label out of range");
    }
  }

  std::size_t dimension() const { return net_.parameter_count(); }
  const nn::CompiledNetwork& network() const { return net_; }

  ValueGradient log_likelihood(std::span<const double> w) const {
    ValueGradient out;
    out.grad.assign(net_.parameter_count(), 0.0);
    const auto& shape = net_.spec().input_shape;
    for (const auto& ex : *data_) {
      const auto lg = nn::backward(net_, w, nn::Tensor(shape, ex.features), ex.label);
      out.value -= lg.loss;
      for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] -= lg.grad[i];
    }
    return out;
  }

 private:
  nn::CompiledNetwork net_;
  const FeatureDataset* data_;
};

}  // namespace bnnsafe::bayes
