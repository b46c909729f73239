#pragma once

// Chernoff sample-size planning and Bernoulli estimators for probabilistic
// safety (eta1) and offline decision confidence (eta2).

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bnnsafe/bayes/sampling.hpp"
#include "bnnsafe/rng.hpp"
#include "bnnsafe/sim/episode.hpp"
#include "bnnsafe/uncertainty.hpp"

namespace bnnsafe::stat {

struct PrecisionSpec {
  double theta = 0.05;  // absolute error bound
  double gamma = 0.05;  // failure probability

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  }
};

// Smallest n with n > ln(2/gamma) / (2 theta^2), so that
// P(|eta_hat - eta| > theta) <= gamma.
inline long chernoff_sample_size(const PrecisionSpec& spec) {
  spec.validate();
  const double bound = std::log(2.0 / spec.gamma) / (2.0 * spec.theta * spec.theta);
  return static_cast<long>(std::floor(bound)) + 1;
}

struct SafetyEstimate {
  double eta_hat = 0.0;
  long n = 0;
  PrecisionSpec spec;
  long safe_count = 0;  // completed + handover without violation
  long completed_count = 0;
  long handover_count = 0;
  long collision_count = 0;
  long out_of_bounds_count = 0;
  long failure_count = 0;  // controller failures, counted unsafe
  double autonomy_rate = 0.0;
  std::array<long, 3> warning_steps{};  // W0, W1, W2 step counts
};

// Runs `count` independent jobs on up to `jobs` threads; results land at their
// index so the outcome does not depend on scheduling.
template <class T, class Fn>
std::vector<T> parallel_map(long count, int jobs, Fn&& fn) {
  std::vector<T> out(static_cast<std::size_t>(count));
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<long>(count, 1))));
  if (jobs == 1) {
    for (long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    return out;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (long i; !failed && (i = next.fetch_add(1)) < count;) {
        try {
          out[static_cast<std::size_t>(i)] = fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

inline double autonomy_rate(const std::vector<sim::EpisodePath>& paths) {
  if (paths.empty()) throw std::invalid_argument("autonomy_rate: no episodes");
  const auto handovers = std::count_if(paths.begin(), paths.end(),
                                       [](const auto& p) { return p.outcome == sim::Outcome::handover; });
  return 1.0 - static_cast<double>(handovers) / static_cast<double>(paths.size());
}

inline SafetyEstimate summarize(const std::vector<sim::EpisodePath>& paths, const PrecisionSpec& spec) {
  SafetyEstimate est;
  est.spec = spec;
  est.n = static_cast<long>(paths.size());
  for (const auto& p : paths) {
    switch (p.outcome) {
      case sim::Outcome::completed: ++est.completed_count; break;
      case sim::Outcome::handover: ++est.handover_count; break;
      case sim::Outcome::collided: ++est.collision_count; break;
      case sim::Outcome::out_of_bounds: ++est.out_of_bounds_count; break;
      case sim::Outcome::controller_failure: ++est.failure_count; break;
    }
    for (const auto& r : p.records)
      if (r.warning != uq::Warning::none) ++est.warning_steps[static_cast<std::size_t>(uq::severity(r.warning) - 1)];
  }
  est.safe_count = est.completed_count + est.handover_count;
  est.eta_hat = est.n > 0 ? static_cast<double>(est.safe_count) / static_cast<double>(est.n) : 0.0;
  est.autonomy_rate = est.n > 0 ? autonomy_rate(paths) : 0.0;
  return est;
}

inline std::uint64_t episode_seed(std::uint64_t master_seed, long index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(index));
}

struct SafetyRun {
  SafetyEstimate estimate;
  std::vector<sim::EpisodePath> paths;
};

// Runs chernoff_sample_size(spec) episodes with per-index seeds and returns
// the certified estimate together with every path.
inline SafetyRun estimate_probabilistic_safety(const sim::ScenarioConfig& sc, const sim::Controller& controller,
                                               const std::optional<sim::MonitorPolicy>& monitor,
                                               const PrecisionSpec& spec, std::uint64_t master_seed, int jobs = 1) {
  const long n = chernoff_sample_size(spec);
  SafetyRun run;
  run.paths = parallel_map<sim::EpisodePath>(
      n, jobs, [&](long i) { return sim::run_episode(sc, controller, monitor, episode_seed(master_seed, i)); });
  run.estimate = summarize(run.paths, spec);
  return run;
}

// Generic Bernoulli estimator: mean of `trial(i)` over the planned sample size.
template <class Trial>
double estimate_bernoulli(const PrecisionSpec& spec, Trial&& trial) {
  const long n = chernoff_sample_size(spec);
  long hits = 0;
  for (long i = 0; i < n; ++i)
    if (trial(i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct ConfidenceEstimate {
  double eta2_hat = 0.0;
  long n = 0;
  uq::Decision decision;
};

// Offline decision confidence: n = chernoff_sample_size(spec) weight samples.
// The decision defaults to the most likely class of the same samples' mean.
inline ConfidenceEstimate estimate_decision_confidence_offline(const bayes::HeadSampler& sampler,
                                                               std::span<const double> features,
                                                               const PrecisionSpec& spec, std::uint64_t seed,
                                                               double epsilon = 0.1, const uq::Binning& bins = {},
                                                               std::optional<uq::Decision> decision = std::nullopt) {
  const long n = chernoff_sample_size(spec);
  Rng rng(seed);
  const auto pred = uq::predictive(sampler, features, static_cast<int>(n), rng);
  ConfidenceEstimate out;
  out.n = n;
  out.decision = decision ? *decision : uq::decide(pred, bins);
  out.eta2_hat = uq::decision_confidence(pred, out.decision, epsilon, bins);
  return out;
}

}  // namespace bnnsafe::stat
