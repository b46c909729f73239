#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bnnsafe/bayes/mcd.hpp"
#include "bnnsafe/nn/architecture.hpp"
#include "bnnsafe/sim/dataset.hpp"
#include "bnnsafe/statcheck.hpp"
#include "oracles.hpp"

using namespace bnnsafe;
using stat::PrecisionSpec;

namespace {

sim::EpisodePath path_with(sim::Outcome o) {
  sim::EpisodePath p;
  p.outcome = o;
  p.records.resize(1);
  return p;
}

sim::Controller jittery_autopilot() {
  return [](const sim::StepInput& in) {
    return sim::ControlOutput{sim::autopilot(in.state, in.scenario) + std::normal_distribution<double>(0, 0.3)(in.rng),
                              std::nullopt};
  };
}

}  // namespace

TEST(Chernoff, Examples) {
  EXPECT_EQ(stat::chernoff_sample_size({0.05, 0.05}), 738);
  EXPECT_EQ(stat::chernoff_sample_size({0.1, 0.05}), 185);
  EXPECT_EQ(stat::chernoff_sample_size({0.5, 1.0}), 2);
  EXPECT_THROW(stat::chernoff_sample_size({0.0, 0.05}), std::invalid_argument);
  EXPECT_THROW(stat::chernoff_sample_size({1.0, 0.05}), std::invalid_argument);
  EXPECT_THROW(stat::chernoff_sample_size({0.1, 0.0}), std::invalid_argument);
  EXPECT_THROW(stat::chernoff_sample_size({0.1, 1.5}), std::invalid_argument);
}

TEST(Chernoff, SmallestStrictSolution) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> th(0.01, 0.5), ga(0.001, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const PrecisionSpec s{th(gen), ga(gen)};
    const long n = stat::chernoff_sample_size(s);
    const double bound = std::log(2.0 / s.gamma) / (2.0 * s.theta * s.theta);
    EXPECT_GT(static_cast<double>(n), bound);
    EXPECT_LE(static_cast<double>(n - 1), bound);
  }
}

TEST(Chernoff, Monotonicity) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> th(0.02, 0.4), ga(0.001, 0.9);
  for (int i = 0; i < 2000; ++i) {
    const PrecisionSpec s{th(gen), ga(gen)};
    const long n = stat::chernoff_sample_size(s);
    EXPECT_GT(stat::chernoff_sample_size({s.theta, s.gamma / 2}), n);
    const long q = stat::chernoff_sample_size({s.theta / 2, s.gamma});
    EXPECT_GE(q, 4 * (n - 1));
    EXPECT_LE(q, 4 * n);
  }
}

TEST(Autonomy, Examples) {
  std::vector<sim::EpisodePath> none(10, path_with(sim::Outcome::completed));
  EXPECT_EQ(stat::autonomy_rate(none), 1.0);
  std::vector<sim::EpisodePath> all(4, path_with(sim::Outcome::handover));
  EXPECT_EQ(stat::autonomy_rate(all), 0.0);
  auto some = none;
  for (int i = 0; i < 3; ++i) some[i] = path_with(sim::Outcome::handover);
  EXPECT_DOUBLE_EQ(stat::autonomy_rate(some), 0.7);
  EXPECT_THROW(stat::autonomy_rate({}), std::invalid_argument);
}

TEST(Summarize, CountsSumToNAndFailuresAreUnsafe) {
  std::vector<sim::EpisodePath> paths;
  const sim::Outcome outcomes[] = {sim::Outcome::completed, sim::Outcome::handover, sim::Outcome::collided,
                                   sim::Outcome::out_of_bounds, sim::Outcome::controller_failure};
  for (int i = 0; i < 20; ++i) paths.push_back(path_with(outcomes[i % 5]));
  paths[0].records[0].warning = uq::Warning::w1;
  paths[1].records[0].warning = uq::Warning::w2;
  const auto e = stat::summarize(paths, {0.1, 0.05});
  EXPECT_EQ(e.n, 20);
  EXPECT_EQ(e.completed_count + e.handover_count + e.collision_count + e.out_of_bounds_count + e.failure_count, e.n);
  EXPECT_EQ(e.safe_count, 8);
  EXPECT_DOUBLE_EQ(e.eta_hat, 8.0 / 20.0);
  EXPECT_EQ(e.failure_count, 4);
  EXPECT_DOUBLE_EQ(e.autonomy_rate, 16.0 / 20.0);
  EXPECT_EQ(e.warning_steps, (std::array<long, 3>{0, 1, 1}));
}

TEST(Summarize, OrderInvariant) {
  std::mt19937_64 gen(3);
  std::vector<sim::EpisodePath> paths;
  for (int i = 0; i < 50; ++i) paths.push_back(path_with(static_cast<sim::Outcome>(gen() % 5)));
  const auto a = stat::summarize(paths, {});
  std::shuffle(paths.begin(), paths.end(), gen);
  const auto b = stat::summarize(paths, {});
  EXPECT_EQ(a.eta_hat, b.eta_hat);
  EXPECT_EQ(a.autonomy_rate, b.autonomy_rate);
}

TEST(Coverage, ChernoffGuaranteeHoldsForBernoulliTrials) {
  const PrecisionSpec spec{0.1, 0.05};
  for (const double p : {0.1, 0.3, 0.5, 0.9}) {
    Rng rng(static_cast<std::uint64_t>(p * 1000));
    int misses = 0;
    for (int rep = 0; rep < 300; ++rep) {
      std::bernoulli_distribution draw(p);
      const double est = stat::estimate_bernoulli(spec, [&](long) { return draw(rng); });
      misses += std::abs(est - p) > spec.theta;
    }
    EXPECT_LE(misses / 300.0, 0.07) << "p = " << p;
  }
}

TEST(SafetyEstimate, AutopilotClearIsPerfect) {
  const auto run = stat::estimate_probabilistic_safety(sim::straight_obstacle(), sim::autopilot_controller(),
                                                       std::nullopt, {0.1, 0.05}, 4, 2);
  EXPECT_EQ(run.estimate.n, 185);
  EXPECT_EQ(run.estimate.eta_hat, 1.0);
  EXPECT_EQ(run.paths.size(), 185u);
}

TEST(SafetyEstimate, ForcedBrakeNeverCollides) {
  const sim::MonitorPolicy forced{{1.01, 1.0, 0.45}, 0.5};
  const sim::Controller ctl = [](const sim::StepInput&) {
    uq::ConfidenceReport r;
    r.eta2 = 0.95;
    return sim::ControlOutput{0.0, r};
  };
  const auto run = stat::estimate_probabilistic_safety(sim::straight_obstacle(), ctl, forced, {0.2, 0.1}, 5);
  EXPECT_EQ(run.estimate.collision_count, 0);
  EXPECT_EQ(run.estimate.autonomy_rate, 0.0);
  EXPECT_EQ(run.estimate.eta_hat, 1.0);
}

TEST(SafetyEstimate, DeterministicAndScheduleIndependent) {
  auto sc = sim::roundabout_first_exit();
  sc.weather = sim::Weather::wet;
  const PrecisionSpec spec{0.25, 0.2};
  const auto a = stat::estimate_probabilistic_safety(sc, jittery_autopilot(), std::nullopt, spec, 11, 1);
  const auto b = stat::estimate_probabilistic_safety(sc, jittery_autopilot(), std::nullopt, spec, 11, 3);
  EXPECT_EQ(a.paths, b.paths);
  EXPECT_EQ(a.estimate.eta_hat, b.estimate.eta_hat);
}

TEST(OfflineConfidence, DegeneratePosteriorIsCertain) {
  nn::NetworkSpec head;
  head.input_shape = {3};
  head.num_classes = 20;
  head.layers = {nn::LayerSpec::dense(20)};
  std::mt19937_64 gen(1);
  const auto w = oracle::random_vector(nn::parameter_count(head), gen);
  const bayes::Posterior post = bayes::HmcPosterior{head, {w}};
  const bayes::HeadSampler sampler(post);
  for (const double theta : {0.05, 0.2}) {
    const auto est = stat::estimate_decision_confidence_offline(sampler, std::vector<double>{0.1, 0.2, 0.3},
                                                                {theta, 0.05}, 7);
    EXPECT_EQ(est.eta2_hat, 1.0);
    EXPECT_EQ(est.n, stat::chernoff_sample_size({theta, 0.05}));
  }
}

TEST(OfflineConfidence, RealTimeEstimateAgreesWithPlannedEstimate) {
  const auto spec = nn::default_network();
  Rng init(3);
  bayes::McdPosterior mcd{spec, nn::kExtractorLayers, nn::init_weights(spec, init)};
  const bayes::Posterior post = mcd;
  const bayes::HeadSampler sampler(post);
  std::vector<std::vector<double>> feats;
  sim::run_episode(sim::straight_obstacle(), sim::autopilot_controller(), std::nullopt, 2,
                   [&](const sim::Observation& obs, const sim::EpisodeRecord& rec) {
                     if (rec.step % 3 == 0 && feats.size() < 50)
                       feats.push_back(bayes::extract_features(mcd, sim::to_tensor(obs)));
                   });
  ASSERT_EQ(feats.size(), 50u);
  std::vector<double> gaps;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto off = stat::estimate_decision_confidence_offline(sampler, feats[i], {0.05, 0.05}, 100 + i);
    EXPECT_GE(off.eta2_hat, 0.0);
    EXPECT_LE(off.eta2_hat, 1.0);
    Rng rng(500 + i);
    const auto rt = uq::assess(uq::predictive(sampler, feats[i], 32, rng), uq::ConfidenceConfig{});
    gaps.push_back(std::abs(off.eta2_hat - rt.report.eta2));
  }
  std::nth_element(gaps.begin(), gaps.begin() + 25, gaps.end());
  const double median = gaps[25];
  std::cout << "median |offline - realtime| eta2 gap: " << median << "\n";
  EXPECT_LE(median, 0.15);
}
