#pragma once

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnnsafe/bayes/likelihood.hpp"
#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/nn/adam.hpp"
#include "bnnsafe/rng.hpp"

namespace bnnsafe::bayes {

// KL( N(mu, exp(rho)^2) || N(0, sigma^2) ), summed over coordinates.
inline double gaussian_kl(std::span<const double> mu, std::span<const double> rho, std::span<const double> sigma) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double var_q = std::exp(2.0 * rho[i]);
    const double var_p = sigma[i] * sigma[i];
    kl += std::log(sigma[i]) - rho[i] + (var_q + mu[i] * mu[i]) / (2.0 * var_p) - 0.5;
  }
  return kl;
}

struct ElboGradient {
  std::vector<double> grad_mu;
  std::vector<double> grad_rho;
  double elbo = 0.0;
};

namespace detail {
inline void check_vi_lengths(std::size_t n, std::span<const double> sigma, std::span<const double> mu,
                             std::span<const double> rho) {
  if (sigma.size() != n || mu.size() != n || rho.size() != n)
    throw std::invalid_argument("VI vectors do not match model dimension");
}
}  // namespace detail

// Reparameterized single-draw ELBO and its gradient for a fixed noise vector
// `zeta` (w = mu + exp(rho) * zeta).
template <LogLikelihood M>
ElboGradient elbo_gradient_at(const M& model, std::span<const double> sigma, std::span<const double> mu,
                              std::span<const double> rho, std::span<const double> zeta) {
  const std::size_t n = model.dimension();
  detail::check_vi_lengths(n, sigma, mu, rho);
  if (zeta.size() != n) throw std::invalid_argument("VI noise vector length mismatch");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = mu[i] + std::exp(rho[i]) * zeta[i];
  const ValueGradient ll = model.log_likelihood(w);

  ElboGradient out;
  out.elbo = ll.value - gaussian_kl(mu, rho, sigma);
  out.grad_mu.resize(n);
  out.grad_rho.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::exp(rho[i]);
    const double var_p = sigma[i] * sigma[i];
    out.grad_mu[i] = ll.grad[i] - mu[i] / var_p;
    out.grad_rho[i] = ll.grad[i] * zeta[i] * s - (s * s / var_p - 1.0);
  }
  if (!std::isfinite(out.elbo) || !nn::all_finite(out.grad_mu) || !nn::all_finite(out.grad_rho))
    throw std::runtime_error("elbo_gradient: non-finite value");
  return out;
}

// Monte Carlo ELBO gradient averaged over `samples` reparameterized draws.
template <LogLikelihood M>
ElboGradient elbo_gradient(const M& model, std::span<const double> sigma, std::span<const double> mu,
                           std::span<const double> rho, Rng& rng, int samples = 1) {
  const std::size_t n = model.dimension();
  detail::check_vi_lengths(n, sigma, mu, rho);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> zeta(n);
  ElboGradient acc{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0};
  for (int s = 0; s < samples; ++s) {
    for (double& z : zeta) z = normal(rng);
    const auto g = elbo_gradient_at(model, sigma, mu, rho, zeta);
    acc.elbo += g.elbo;
    for (std::size_t i = 0; i < n; ++i) {
      acc.grad_mu[i] += g.grad_mu[i];
      acc.grad_rho[i] += g.grad_rho[i];
    }
  }
  const double inv = 1.0 / samples;
  acc.elbo *= inv;
  for (std::size_t i = 0; i < n; ++i) {
    acc.grad_mu[i] *= inv;
    acc.grad_rho[i] *= inv;
  }
  return acc;
}

struct ViFit {
  std::vector<double> mu;
  std::vector<double> rho;
  std::vector<double> elbo_trace;
};

// ADAM ascent on the ELBO starting from (mu0, rho0).
template <LogLikelihood M>
ViFit fit_vi(const M& model, std::span<const double> sigma, const ViConfig& cfg, std::vector<double> mu0,
             std::vector<double> rho0) {
  cfg.validate();
  const std::size_t n = model.dimension();
  detail::check_vi_lengths(n, sigma, mu0, rho0);
  ViFit fit{std::move(mu0), std::move(rho0), {}};
  fit.elbo_trace.reserve(static_cast<std::size_t>(cfg.iterations));
  auto adam_mu = nn::AdamState::for_size(n, cfg.learning_rate);
  auto adam_rho = nn::AdamState::for_size(n, cfg.learning_rate);
  Rng rng(cfg.seed);
  std::vector<double> neg(n);
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto g = elbo_gradient(model, sigma, fit.mu, fit.rho, rng, cfg.mc_samples);
    fit.elbo_trace.push_back(g.elbo);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -g.grad_mu[i];
    nn::adam_step(adam_mu, fit.mu, neg);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -g.grad_rho[i];
    nn::adam_step(adam_rho, fit.rho, neg);
  }
  return fit;
}

// Mean-field VI over a network head. The mean starts at `init_mu` (typically
// the MC-dropout head weights) and every log-std at cfg.init_log_std.
inline ViPosterior train_vi(const FeatureDataset& data, const nn::NetworkSpec& head, const Prior& prior,
                            const ViConfig& cfg, const WeightVector& init_mu, std::vector<double>* elbo_trace = nullptr) {
  if (data.empty()) throw std::invalid_argument("train_vi: empty dataset");
  const HeadLikelihood model(head, data);
  const auto sigma = prior.expand(model.network());
  if (init_mu.size() != model.dimension()) throw std::invalid_argument("train_vi: initial mean length mismatch");
  auto fit = fit_vi(model, sigma, cfg, init_mu, std::vector<double>(model.dimension(), cfg.init_log_std));
  if (elbo_trace) *elbo_trace = std::move(fit.elbo_trace);
  return ViPosterior{head, std::move(fit.mu), std::move(fit.rho)};
}

}  // namespace bnnsafe::bayes
