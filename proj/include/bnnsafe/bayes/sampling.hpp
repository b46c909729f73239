#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/nn/network.hpp"
#include "bnnsafe/rng.hpp"

namespace bnnsafe::bayes {

// One draw from a posterior over head weights. MC-dropout draws share the
// trained weights and differ only in their mask.
struct WeightSample {
  std::shared_ptr<const WeightVector> weights;
  std::optional<nn::DropoutMask> mask;
};

// Caches the compiled head and shared weights of a posterior for repeated
// sampling.
class HeadSampler {
 public:
  explicit HeadSampler(const Posterior& post) : post_(&post), head_(head_spec(post)) {
    validate(post);
    if (const auto* mcd = std::get_if<McdPosterior>(&post))
      shared_ = std::make_shared<const WeightVector>(mcd->head_weights());
    else if (const auto* hmc = std::get_if<HmcPosterior>(&post)) {
      stored_.reserve(hmc->samples.size());
      for (const auto& s : hmc->samples) stored_.push_back(std::make_shared<const WeightVector>(s));
    }
  }

  const nn::CompiledNetwork& head() const { return head_; }

  std::vector<WeightSample> sample(int n, Rng& rng) const {
    if (n < 1) throw std::invalid_argument("sample_weights: n must be at least 1");
    std::vector<WeightSample> out;
    out.reserve(static_cast<std::size_t>(n));
    switch (post_->index()) {
      case 0:
        for (int i = 0; i < n; ++i) out.push_back({shared_, nn::sample_dropout_mask(head_, rng)});
        break;
      case 1: {
        const auto& vi = std::get<ViPosterior>(*post_);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
          WeightVector w(vi.mu.size());
          for (std::size_t j = 0; j < w.size(); ++j) w[j] = vi.mu[j] + std::exp(vi.rho[j]) * normal(rng);
          out.push_back({std::make_shared<const WeightVector>(std::move(w)), std::nullopt});
        }
        break;
      }
      default: {
        std::uniform_int_distribution<std::size_t> pick(0, stored_.size() - 1);
        for (int i = 0; i < n; ++i) out.push_back({stored_[pick(rng)], std::nullopt});
        break;
      }
    }
    return out;
  }

 private:
  const Posterior* post_;
  nn::CompiledNetwork head_;
  std::shared_ptr<const WeightVector> shared_;
  std::vector<std::shared_ptr<const WeightVector>> stored_;
};

inline std::vector<WeightSample> sample_weights(const Posterior& post, int n, Rng& rng) {
  return HeadSampler(post).sample(n, rng);
}

}  // namespace bnnsafe::bayes
