#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bnnsafe/bayes/hmc.hpp"
#include "bnnsafe/bayes/mcd.hpp"
#include "bnnsafe/bayes/sampling.hpp"
#include "bnnsafe/bayes/vi.hpp"
#include "bnnsafe/nn/architecture.hpp"
#include "oracles.hpp"

using namespace bnnsafe;
using bayes::FeatureDataset;
using nn::LayerSpec;
using nn::NetworkSpec;

namespace {

NetworkSpec small_head(int in = 4, int classes = 3, bool smooth = false) {
  NetworkSpec s;
  s.input_shape = {in};
  s.num_classes = classes;
  if (smooth)
    s.layers = {LayerSpec::dense(5), LayerSpec::dense(classes)};
  else
    s.layers = {LayerSpec::dense(5), LayerSpec::relu(), LayerSpec::dense(classes)};
  return s;
}

FeatureDataset random_features(std::mt19937_64& gen, int n, int dim, int classes) {
  FeatureDataset d;
  for (int i = 0; i < n; ++i)
    d.push_back({oracle::random_vector(static_cast<std::size_t>(dim), gen),
                 static_cast<int>(gen() % static_cast<unsigned>(classes))});
  return d;
}

// y_i ~ N(w, 1): a one-parameter conjugate model.
struct GaussianMeanModel {
  std::vector<double> y;
  std::size_t dimension() const { return 1; }
  bayes::ValueGradient log_likelihood(std::span<const double> w) const {
    bayes::ValueGradient out{0.0, {0.0}};
    for (double v : y) {
      out.value -= 0.5 * (v - w[0]) * (v - w[0]);
      out.grad[0] += v - w[0];
    }
    return out;
  }
};

struct EmptyModel {
  std::size_t n;
  std::size_t dimension() const { return n; }
  bayes::ValueGradient log_likelihood(std::span<const double>) const { return {0.0, std::vector<double>(n, 0.0)}; }
};

bayes::ImageDataset toy_images(int per_class, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  bayes::ImageDataset data;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    std::vector<double> px(48 * 64);
    for (int r = 0; r < 48; ++r)
      for (int c = 0; c < 64; ++c) {
        const bool bright = label == 0 ? c < 32 : c >= 32;
        px[r * 64 + c] = std::clamp((bright ? 0.8 : 0.2) + noise(gen), 0.0, 1.0);
      }
    data.push_back({nn::Tensor({48, 64, 1}, px), label});
  }
  return data;
}

}  // namespace

// ---------------------------------------------------------------- MC dropout

TEST(Mcd, SeparableToyReachesHighAccuracy) {
  const auto data = toy_images(40, 3);
  Rng rng(5);
  const auto mcd = bayes::train_mcd(data, nn::default_network(2), {25, 16, 1e-4}, rng);
  EXPECT_GE(bayes::training_accuracy(mcd, data), 0.95);
}

TEST(Mcd, ZeroEpochsReturnsInitialization) {
  const auto data = toy_images(2, 1);
  const auto spec = nn::default_network(2);
  Rng rng(9), ref(9);
  const auto mcd = bayes::train_mcd(data, spec, {0, 16, 1e-4}, rng);
  EXPECT_EQ(mcd.weights, nn::init_weights(spec, ref));
}

TEST(Mcd, DeterministicAndRejectsEmpty) {
  const auto data = toy_images(3, 2);
  const auto spec = nn::default_network(2);
  Rng a(4), b(4);
  EXPECT_EQ(bayes::train_mcd(data, spec, {2, 4, 1e-3}, a), bayes::train_mcd(data, spec, {2, 4, 1e-3}, b));
  Rng c(1);
  EXPECT_THROW(bayes::train_mcd({}, spec, {}, c), std::invalid_argument);
}

TEST(Mcd, RatesAndHeadSlicing) {
  Rng rng(1);
  const auto spec = nn::default_network();
  bayes::McdPosterior mcd{spec, nn::kExtractorLayers, nn::init_weights(spec, rng)};
  EXPECT_EQ(mcd.rates(), (std::vector<double>{0.1, 0.08, 0.08}));
  EXPECT_EQ(mcd.feature_width(), 64);
  EXPECT_EQ(mcd.head_weights().size() + mcd.extractor_weights().size(), mcd.weights.size());
  EXPECT_EQ(mcd.head_weights().size(), nn::parameter_count(mcd.head_spec()));
}

TEST(ExtractFeatures, ZeroImageZeroBiasGivesZeroFeatures) {
  Rng rng(2);
  const auto spec = nn::default_network();
  bayes::McdPosterior mcd{spec, nn::kExtractorLayers, nn::init_weights(spec, rng)};
  const auto f = bayes::extract_features(mcd, nn::Tensor({48, 64, 1}));
  ASSERT_EQ(f.size(), 64u);
  for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(ExtractFeatures, MatchesNaiveLoopAndChecksShape) {
  Rng rng(3);
  const auto spec = nn::default_network();
  bayes::McdPosterior mcd{spec, nn::kExtractorLayers, nn::init_weights(spec, rng)};
  std::mt19937_64 gen(4);
  for (double& w : mcd.weights) w += 0.01 * std::normal_distribution<double>()(gen);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> px(48 * 64);
  for (double& v : px) v = u(gen);
  NetworkSpec extractor = spec;
  extractor.layers.resize(nn::kExtractorLayers);
  const auto want = oracle::naive_forward(extractor, mcd.weights, px);
  const auto got = bayes::extract_features(mcd, nn::Tensor({48, 64, 1}, px));
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
  EXPECT_THROW(bayes::extract_features(mcd, nn::Tensor({64, 48, 1})), std::invalid_argument);
}

// ------------------------------------------------------------------------ VI

TEST(Vi, KlIsZeroAtPriorAndGradientVanishes) {
  const std::vector<double> sigma{0.5, 1.0, 2.0};
  const std::vector<double> mu(3, 0.0);
  std::vector<double> rho;
  for (double s : sigma) rho.push_back(std::log(s));
  EXPECT_NEAR(bayes::gaussian_kl(mu, rho, sigma), 0.0, 1e-15);
  const EmptyModel model{3};
  const auto g = bayes::elbo_gradient_at(model, sigma, mu, rho, std::vector<double>{0.3, -1.2, 0.8});
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(g.grad_mu[i], 0.0, 1e-15);
    EXPECT_NEAR(g.grad_rho[i], 0.0, 1e-15);
  }
}

TEST(Vi, EmptyDataGradientIsNegativeKlGradient) {
  std::mt19937_64 gen(1);
  const std::vector<double> sigma{1.0, 0.7, 1.3, 2.0};
  const auto mu = oracle::random_vector(4, gen);
  const auto rho = oracle::random_vector(4, gen, 0.5);
  Rng rng(2);
  const auto g = bayes::elbo_gradient(EmptyModel{4}, sigma, mu, rho, rng);
  const auto num_mu = oracle::central_difference(
      [&](const std::vector<double>& m) { return -bayes::gaussian_kl(m, rho, sigma); }, mu);
  const auto num_rho = oracle::central_difference(
      [&](const std::vector<double>& r) { return -bayes::gaussian_kl(mu, r, sigma); }, rho);
  EXPECT_LT(oracle::max_relative_error(g.grad_mu, num_mu), 1e-6);
  EXPECT_LT(oracle::max_relative_error(g.grad_rho, num_rho), 1e-6);
}

TEST(Vi, ElboGradientMatchesFiniteDifferencesWithCommonRandomNumbers) {
  std::mt19937_64 gen(7);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto head = small_head(4, 3);
    const auto data = random_features(gen, 6, 4, 3);
    const bayes::HeadLikelihood model(head, data);
    const std::size_t n = model.dimension();
    const std::vector<double> sigma(n, 0.8 + 0.1 * (trial % 5));
    const auto mu = oracle::random_vector(n, gen, 0.5);
    auto rho = oracle::random_vector(n, gen, 0.3);
    for (double& r : rho) r -= 1.5;
    const auto zeta = oracle::random_vector(n, gen);
    const auto g = bayes::elbo_gradient_at(model, sigma, mu, rho, zeta);
    const auto num_mu = oracle::central_difference(
        [&](const std::vector<double>& m) { return bayes::elbo_gradient_at(model, sigma, m, rho, zeta).elbo; }, mu);
    const auto num_rho = oracle::central_difference(
        [&](const std::vector<double>& r) { return bayes::elbo_gradient_at(model, sigma, mu, r, zeta).elbo; }, rho);
    worst = std::max({worst, oracle::max_relative_error(g.grad_mu, num_mu),
                      oracle::max_relative_error(g.grad_rho, num_rho)});
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Vi, ConjugateGaussianRecovery) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> obs(0.7, 1.0);
  GaussianMeanModel model;
  for (int i = 0; i < 20; ++i) model.y.push_back(obs(gen));
  const double post_mean = std::accumulate(model.y.begin(), model.y.end(), 0.0) / 21.0;
  const double post_sd = std::sqrt(1.0 / 21.0);
  bayes::ViConfig cfg;
  cfg.iterations = 4000;
  cfg.learning_rate = 0.01;
  cfg.seed = 11;
  const std::vector<double> sigma{1.0};
  const auto fit = bayes::fit_vi(model, sigma, cfg, {0.0}, {0.0});
  EXPECT_NEAR(fit.mu[0], post_mean, 0.05);
  EXPECT_NEAR(std::exp(fit.rho[0]) / post_sd, 1.0, 0.10);

  // averaged ELBO rises window over window, up to Monte Carlo noise
  const std::size_t w = 100;
  double prev_mean = -INFINITY, prev_var = 0.0;
  for (std::size_t k = 0; k + w <= fit.elbo_trace.size(); k += w) {
    double s = 0.0, sq = 0.0;
    for (std::size_t i = k; i < k + w; ++i) {
      s += fit.elbo_trace[i];
      sq += fit.elbo_trace[i] * fit.elbo_trace[i];
    }
    const double mean = s / w, var = sq / w - mean * mean;
    if (std::isfinite(prev_mean)) {
      EXPECT_GE(mean, prev_mean - 3.0 * std::sqrt((var + prev_var) / w)) << "window " << k;
    }
    prev_mean = mean;
    prev_var = var;
  }
}

TEST(Vi, ZeroIterationsAndDeterminism) {
  std::mt19937_64 gen(5);
  const auto head = small_head();
  const auto data = random_features(gen, 5, 4, 3);
  const auto init = oracle::random_vector(nn::parameter_count(head), gen);
  bayes::ViConfig cfg;
  cfg.iterations = 0;
  const auto v0 = bayes::train_vi(data, head, {}, cfg, init);
  EXPECT_EQ(v0.mu, init);
  EXPECT_EQ(v0.rho, std::vector<double>(init.size(), cfg.init_log_std));
  cfg.iterations = 30;
  EXPECT_EQ(bayes::train_vi(data, head, {}, cfg, init), bayes::train_vi(data, head, {}, cfg, init));
  EXPECT_THROW(bayes::train_vi({}, head, {}, cfg, init), std::invalid_argument);
}

// ----------------------------------------------------------------------- HMC

TEST(Hmc, PotentialOfEmptyDatasetIsHalfSquaredNorm) {
  std::mt19937_64 gen(1);
  const auto head = small_head();
  const FeatureDataset empty;
  const bayes::HeadLikelihood model(head, empty);
  const std::vector<double> sigma(model.dimension(), 1.0);
  auto w = oracle::random_vector(model.dimension(), gen);
  const auto u = bayes::potential_energy(model, sigma, w);
  double sq = 0.0;
  for (double v : w) sq += v * v;
  EXPECT_NEAR(u.value, 0.5 * sq, 1e-12);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(u.grad[i], w[i], 1e-15);
  for (double& v : w) v *= 2.0;
  EXPECT_NEAR(bayes::potential_energy(model, sigma, w).value, 4.0 * u.value, 1e-10);
}

TEST(Hmc, PotentialGradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto head = small_head(3 + trial % 3, 2 + trial % 3);
    const auto data = random_features(gen, 5, 3 + trial % 3, 2 + trial % 3);
    const bayes::HeadLikelihood model(head, data);
    const bayes::Prior prior{{0.5 + 0.25 * (trial % 4)}};
    const auto sigma = prior.expand(model.network());
    const auto w = oracle::random_vector(model.dimension(), gen, 0.7);
    const auto g = bayes::potential_energy(model, sigma, w).grad;
    const auto num = oracle::central_difference(
        [&](const std::vector<double>& v) { return bayes::potential_energy(model, sigma, v).value; }, w);
    EXPECT_LT(oracle::max_relative_error(g, num), 1e-4) << "trial " << trial;
  }
}

TEST(Hmc, LeapfrogHarmonicMatchesClosedFormRecursion) {
  const double eps = 0.1;
  auto [q, p] = bayes::leapfrog({1.0}, {0.0}, eps, 10, [](const std::vector<double>& x) { return x; });
  // one leapfrog step on U = q^2/2 is the linear map M below
  const double a = 1.0 - eps * eps / 2.0, b = eps, c = -eps * (1.0 - eps * eps / 4.0);
  double qq = 1.0, pp = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double qn = a * qq + b * pp, pn = c * qq + a * pp;
    qq = qn;
    pp = pn;
  }
  EXPECT_NEAR(q[0], qq, 1e-14);
  EXPECT_NEAR(p[0], pp, 1e-14);
}

TEST(Hmc, LeapfrogIsReversibleOnRandomHeads) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto head = small_head();
    const auto data = random_features(gen, 8, 4, 3);
    const bayes::HeadLikelihood model(head, data);
    const std::vector<double> sigma(model.dimension(), 1.0);
    auto grad = [&](const std::vector<double>& x) { return bayes::potential_energy(model, sigma, x).grad; };
    const auto q0 = oracle::random_vector(model.dimension(), gen, 0.5);
    const auto p0 = oracle::random_vector(model.dimension(), gen);
    auto [q1, p1] = bayes::leapfrog(q0, p0, 0.01, 10, grad);
    for (double& v : p1) v = -v;
    auto [q2, p2] = bayes::leapfrog(q1, p1, 0.01, 10, grad);
    for (std::size_t i = 0; i < q0.size(); ++i) {
      EXPECT_NEAR(q2[i], q0[i], 1e-9);
      EXPECT_NEAR(-p2[i], p0[i], 1e-9);
    }
  }
}

TEST(Hmc, LeapfrogEnergyErrorIsSecondOrder) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto head = small_head(4, 3, true);
    const auto data = random_features(gen, 10, 4, 3);
    const bayes::HeadLikelihood model(head, data);
    const std::vector<double> sigma(model.dimension(), 1.0);
    auto energy = [&](const std::vector<double>& q, const std::vector<double>& p) {
      return bayes::potential_energy(model, sigma, q).value + bayes::kinetic_energy(p);
    };
    auto grad = [&](const std::vector<double>& x) { return bayes::potential_energy(model, sigma, x).grad; };
    const auto q0 = oracle::random_vector(model.dimension(), gen, 0.5);
    const auto p0 = oracle::random_vector(model.dimension(), gen);
    const double h0 = energy(q0, p0);
    const auto [q1, p1] = bayes::leapfrog(q0, p0, 0.02, 10, grad);
    const auto [q2, p2] = bayes::leapfrog(q0, p0, 0.01, 20, grad);
    const double e1 = std::abs(energy(q1, p1) - h0), e2 = std::abs(energy(q2, p2) - h0);
    EXPECT_GT(e1 / e2, 3.0) << "trial " << trial;
    EXPECT_LT(e1 / e2, 5.0) << "trial " << trial;
  }
}

TEST(Hmc, PriorOnlyTargetMoments) {
  const auto head = small_head(3, 2);
  const FeatureDataset empty;
  const bayes::HeadLikelihood model(head, empty);
  const std::vector<double> sigma(model.dimension(), 1.0);
  bayes::HmcConfig cfg{0.2, 10, 200, 5000, 1};
  Rng rng(12);
  const auto run = bayes::run_hmc(model, sigma, cfg, std::vector<double>(model.dimension(), 0.0), rng);
  ASSERT_EQ(run.samples.size(), 5000u);
  // sum of squared mean z-scores is chi-square with one degree per coordinate
  double chi2 = 0.0;
  for (std::size_t d = 0; d < model.dimension(); ++d) {
    std::vector<double> x;
    for (const auto& s : run.samples) x.push_back(s[d]);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size() - 1);
    const double z = mean / oracle::batch_means_se(x);
    chi2 += z * z;
    EXPECT_NEAR(var, 1.0, 0.1) << "coordinate " << d;
  }
  // 99.9% quantile of chi-square with 32 degrees of freedom
  ASSERT_EQ(model.dimension(), 32u);
  EXPECT_LT(chi2, 62.49);
}

TEST(Hmc, HugeStepIsRejectedAlmostAlways) {
  std::mt19937_64 gen(6);
  const auto head = small_head();
  const auto data = random_features(gen, 20, 4, 3);
  bayes::HmcConfig cfg{10.0, 10, 0, 200, 1};
  Rng rng(1);
  double acc = 1.0;
  bayes::train_hmc(data, head, {}, cfg, std::vector<double>(nn::parameter_count(head), 0.0), rng, &acc);
  EXPECT_LT(acc, 0.1);
}

TEST(Hmc, DeterministicGivenSeed) {
  std::mt19937_64 gen(7);
  const auto head = small_head();
  const auto data = random_features(gen, 10, 4, 3);
  const bayes::HmcConfig cfg{0.05, 10, 20, 30, 2};
  const auto init = oracle::random_vector(nn::parameter_count(head), gen, 0.3);
  Rng a(3), b(3);
  const auto pa = bayes::train_hmc(data, head, {}, cfg, init, a);
  const auto pb = bayes::train_hmc(data, head, {}, cfg, init, b);
  EXPECT_EQ(pa, pb);
  EXPECT_EQ(pa.samples.size(), 30u);
}

TEST(Hmc, ConfigValidation) {
  EXPECT_THROW((bayes::HmcConfig{0.0, 10, 0, 1, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((bayes::HmcConfig{0.1, 0, 0, 1, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((bayes::HmcConfig{0.1, 10, -1, 1, 1}.validate()), std::invalid_argument);
}

// ------------------------------------------------------------------ sampling

TEST(Sampling, DegenerateViGivesMean) {
  std::mt19937_64 gen(1);
  const auto head = small_head();
  const auto mu = oracle::random_vector(nn::parameter_count(head), gen);
  bayes::Posterior post = bayes::ViPosterior{head, mu, std::vector<double>(mu.size(), -1000.0)};
  Rng rng(2);
  for (const auto& s : bayes::sample_weights(post, 5, rng)) EXPECT_EQ(*s.weights, mu);
}

TEST(Sampling, SingleHmcSampleRepeats) {
  std::mt19937_64 gen(2);
  const auto head = small_head();
  const auto w = oracle::random_vector(nn::parameter_count(head), gen);
  bayes::Posterior post = bayes::HmcPosterior{head, {w}};
  Rng rng(3);
  for (const auto& s : bayes::sample_weights(post, 7, rng)) EXPECT_EQ(*s.weights, w);
  EXPECT_THROW(bayes::sample_weights(post, 0, rng), std::invalid_argument);
}

TEST(Sampling, ViSampleMeanConcentrates) {
  NetworkSpec head;
  head.input_shape = {1};
  head.num_classes = 2;
  head.layers = {LayerSpec::dense(2)};
  const std::vector<double> mu{0.5, -1.0, 2.0, 0.0};
  const std::vector<double> rho{0.0, -1.0, 0.5, -2.0};
  bayes::Posterior post = bayes::ViPosterior{head, mu, rho};
  Rng rng(4);
  const int n = 100000;
  const auto draws = bayes::sample_weights(post, n, rng);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    double s = 0.0;
    for (const auto& d : draws) s += (*d.weights)[j];
    EXPECT_LE(std::abs(s / n - mu[j]), 3.0 * std::exp(rho[j]) / std::sqrt(n));
  }
}

TEST(Sampling, McdDrawsShareWeightsAndDifferInMasks) {
  Rng init(1);
  const auto spec = nn::default_network();
  bayes::Posterior post = bayes::McdPosterior{spec, nn::kExtractorLayers, nn::init_weights(spec, init)};
  Rng a(5), b(5);
  const auto s1 = bayes::sample_weights(post, 4, a);
  const auto s2 = bayes::sample_weights(post, 4, b);
  for (int i = 0; i < 4; ++i) {
    ASSERT_TRUE(s1[i].mask.has_value());
    EXPECT_EQ(*s1[i].mask, *s2[i].mask);
    EXPECT_EQ(*s1[i].weights, std::get<bayes::McdPosterior>(post).head_weights());
  }
  EXPECT_NE(*s1[0].mask, *s1[1].mask);
}

TEST(Posterior, ValidationCatchesLengthErrors) {
  const auto head = small_head();
  EXPECT_THROW(bayes::validate(bayes::Posterior{bayes::ViPosterior{head, {1.0}, {1.0}}}), std::invalid_argument);
  EXPECT_THROW(bayes::validate(bayes::Posterior{bayes::HmcPosterior{head, {}}}), std::invalid_argument);
  EXPECT_THROW(bayes::Prior{{-1.0}}.expand(nn::CompiledNetwork(head)), std::invalid_argument);
}
