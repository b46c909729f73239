#pragma once

// Predictive distributions from posterior weight samples, the deployed
// decision, decision confidence (eta2), mutual information and the tiered
// warning classification.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnnsafe/bayes/sampling.hpp"
#include "bnnsafe/nn/network.hpp"
#include "bnnsafe/rng.hpp"

namespace bnnsafe::uq {

struct Binning {
  int num_classes = 20;
  double lo = -1.0;
  double hi = 1.0;

  double width() const { return (hi - lo) / num_classes; }
  double center(int cls) const { return lo + (cls + 0.5) * width(); }

  // Angles outside [lo, hi] are clamped; the top edge maps into the last bin.
  int to_class(double angle) const {
    const double a = std::clamp(angle, lo, hi);
    const int c = static_cast<int>(std::floor((a - lo) * num_classes / (hi - lo)));
    return std::clamp(c, 0, num_classes - 1);
  }
};

inline int steering_to_class(double angle, const Binning& bins = {}) { return bins.to_class(angle); }
inline double bin_center(int cls, const Binning& bins = {}) { return bins.center(cls); }

struct PredictiveDistribution {
  std::vector<std::vector<double>> per_sample;  // n x K softmax rows
  std::vector<double> mean;

  std::size_t samples() const { return per_sample.size(); }

  static PredictiveDistribution from_rows(std::vector<std::vector<double>> rows) {
    if (rows.empty()) throw std::invalid_argument("predictive distribution needs at least one row");
    const std::size_t k = rows.front().size();
    PredictiveDistribution pd;
    pd.mean.assign(k, 0.0);
    for (const auto& r : rows) {
      if (r.size() != k) throw std::invalid_argument("predictive rows have differing lengths");
      for (std::size_t j = 0; j < k; ++j) pd.mean[j] += r[j];
    }
    for (double& m : pd.mean) m /= static_cast<double>(rows.size());
    pd.per_sample = std::move(rows);
    return pd;
  }
};

// Softmax outputs of `n` posterior draws evaluated on head input `features`.
inline PredictiveDistribution predictive(const bayes::HeadSampler& sampler, std::span<const double> features, int n,
                                         Rng& rng) {
  const auto& head = sampler.head();
  const nn::Tensor input(head.spec().input_shape, std::vector<double>(features.begin(), features.end()));
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (const auto& s : sampler.sample(n, rng)) {
    const auto logits = nn::forward(head, *s.weights, input, s.mask ? &*s.mask : nullptr);
    rows.push_back(nn::softmax(logits.values()));
  }
  return PredictiveDistribution::from_rows(std::move(rows));
}

inline PredictiveDistribution predictive(const bayes::Posterior& post, std::span<const double> features, int n,
                                         Rng& rng) {
  return predictive(bayes::HeadSampler(post), features, n, rng);
}

// First index of the maximum.
inline int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct Decision {
  int class_index = 0;
  double steering = 0.0;
};

inline Decision decide(const PredictiveDistribution& pred, const Binning& bins = {}) {
  const int c = argmax(pred.mean);
  return {c, bins.center(c)};
}

// Fraction of sampled networks whose own most likely class lies within
// `epsilon` of the deployed steering decision.
inline double decision_confidence(const PredictiveDistribution& pred, const Decision& decision, double epsilon,
                                  const Binning& bins = {}) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("decision_confidence: epsilon must be positive");
  // Bin centers are computed in floating point; a tiny slack keeps exact
  // multiples of the bin width inside the ball.
  const double tol = epsilon + 1e-9 * bins.width();
  std::size_t inside = 0;
  for (const auto& row : pred.per_sample)
    if (std::abs(bins.center(argmax(row)) - decision.steering) <= tol) ++inside;
  return static_cast<double>(inside) / static_cast<double>(pred.samples());
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

// BALD mutual information in nats: H(mean) - mean_i H(row_i), clamped to
// [0, H(mean)].
inline double mutual_information(const PredictiveDistribution& pred) {
  const double h_mean = entropy(pred.mean);
  double h_rows = 0.0;
  for (const auto& r : pred.per_sample) h_rows += entropy(r);
  h_rows /= static_cast<double>(pred.samples());
  return std::clamp(h_mean - h_rows, 0.0, h_mean);
}

enum class Warning { none, w0, w1, w2 };

inline const char* to_string(Warning w) {
  switch (w) {
    case Warning::none: return "";
    case Warning::w0: return "W0";
    case Warning::w1: return "W1";
    case Warning::w2: return "W2";
  }
  return "";
}

inline int severity(Warning w) { return static_cast<int>(w); }

struct WarningThresholds {
  double delta1 = 0.7;
  double delta2 = 0.6;
  double mi_threshold = 0.45;

  void validate() const {
    if (!(delta2 < delta1)) throw std::invalid_argument("warning thresholds require delta2 < delta1");
  }
};

inline Warning classify_warning(double eta2, double mi, const WarningThresholds& t) {
  if (eta2 < t.delta2) return Warning::w2;
  if (eta2 < t.delta1) return Warning::w1;
  if (mi > t.mi_threshold) return Warning::w0;
  return Warning::none;
}

struct ConfidenceReport {
  double eta2 = 1.0;
  double mutual_info = 0.0;
  Warning warning = Warning::none;
  int n_samples = 0;
};

struct ConfidenceConfig {
  Binning bins;
  double epsilon = 0.1;
  int samples = 32;
  WarningThresholds thresholds;
};

struct AssessedDecision {
  Decision decision;
  ConfidenceReport report;
};

inline AssessedDecision assess(const PredictiveDistribution& pred, const ConfidenceConfig& cfg) {
  AssessedDecision out;
  out.decision = decide(pred, cfg.bins);
  out.report.eta2 = decision_confidence(pred, out.decision, cfg.epsilon, cfg.bins);
  out.report.mutual_info = mutual_information(pred);
  out.report.warning = classify_warning(out.report.eta2, out.report.mutual_info, cfg.thresholds);
  out.report.n_samples = static_cast<int>(pred.samples());
  return out;
}

}  // namespace bnnsafe::uq
