#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bnnsafe/bayes/likelihood.hpp"
#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/rng.hpp"

namespace bnnsafe::bayes {

// U(w) = -log p(D|w) + sum_i w_i^2 / (2 sigma_i^2), i.e. negative log
// posterior up to a constant.
template <LogLikelihood M>
ValueGradient potential_energy(const M& model, std::span<const double> sigma, std::span<const double> w) {
  if (w.size() != model.dimension() || sigma.size() != model.dimension())
    throw std::invalid_argument("potential_energy: length mismatch");
  ValueGradient ll = model.log_likelihood(w);
  ValueGradient out{-ll.value, std::move(ll.grad)};
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double inv_var = 1.0 / (sigma[i] * sigma[i]);
    out.value += 0.5 * w[i] * w[i] * inv_var;
    out.grad[i] = -out.grad[i] + w[i] * inv_var;
  }
  if (!std::isfinite(out.value) || !nn::all_finite(out.grad))
    throw std::runtime_error("potential_energy: non-finite value");
  return out;
}

// L leapfrog steps of size eps: half momentum step, alternating full steps,
// closing half momentum step. `grad_u(q)` returns dU/dq.
template <class GradFn>
std::pair<std::vector<double>, std::vector<double>> leapfrog(std::vector<double> q, std::vector<double> p, double eps,
                                                             int steps, GradFn&& grad_u) {
  if (q.size() != p.size()) throw std::invalid_argument("leapfrog: position / momentum length mismatch");
  if (steps < 1) throw std::invalid_argument("leapfrog: needs at least one step");
  std::vector<double> g = grad_u(q);
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < q.size(); ++i) p[i] -= 0.5 * eps * g[i];
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += eps * p[i];
    g = grad_u(q);
    for (std::size_t i = 0; i < q.size(); ++i) p[i] -= 0.5 * eps * g[i];
  }
  return {std::move(q), std::move(p)};
}

inline double kinetic_energy(std::span<const double> p) {
  double k = 0.0;
  for (double x : p) k += 0.5 * x * x;
  return k;
}

struct HmcRun {
  std::vector<std::vector<double>> samples;
  double acceptance_rate = 0.0;
};

// Metropolis-corrected HMC with unit-mass momentum refreshed every iteration.
template <LogLikelihood M>
HmcRun run_hmc(const M& model, std::span<const double> sigma, const HmcConfig& cfg, std::vector<double> q0, Rng& rng) {
  cfg.validate();
  if (q0.size() != model.dimension()) throw std::invalid_argument("run_hmc: initial position length mismatch");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> q = std::move(q0);
  ValueGradient current = potential_energy(model, sigma, q);
  auto grad_u = [&](const std::vector<double>& x) { return potential_energy(model, sigma, x).grad; };

  const long total = static_cast<long>(cfg.burn_in) + static_cast<long>(cfg.samples) * cfg.thinning;
  HmcRun run;
  run.samples.reserve(static_cast<std::size_t>(cfg.samples));
  long accepted = 0;
  std::vector<double> p(q.size());
  for (long it = 0; it < total; ++it) {
    for (double& x : p) x = normal(rng);
    const double h0 = current.value + kinetic_energy(p);
    auto [q_new, p_new] = leapfrog(q, p, cfg.step_size, cfg.leapfrog_steps, grad_u);
    double h1 = std::numeric_limits<double>::infinity();
    ValueGradient proposed;
    bool finite = nn::all_finite(q_new) && nn::all_finite(p_new);
    if (finite) {
      try {
        proposed = potential_energy(model, sigma, q_new);
        h1 = proposed.value + kinetic_energy(p_new);
      } catch (const std::runtime_error&) {
        finite = false;
      }
    }
    const double u = uniform(rng);
    if (finite && std::isfinite(h1) && u < std::exp(std::min(0.0, h0 - h1))) {
      q = std::move(q_new);
      current = std::move(proposed);
      ++accepted;
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thinning == 0) run.samples.push_back(q);
  }
  run.acceptance_rate = total > 0 ? static_cast<double>(accepted) / static_cast<double>(total) : 0.0;
  return run;
}

inline HmcPosterior train_hmc(const FeatureDataset& data, const nn::NetworkSpec& head, const Prior& prior,
                              const HmcConfig& cfg, const WeightVector& init, Rng& rng,
                              double* acceptance_rate = nullptr) {
  const HeadLikelihood model(head, data);
  const auto sigma = prior.expand(model.network());
  auto run = run_hmc(model, sigma, cfg, init, rng);
  if (acceptance_rate) *acceptance_rate = run.acceptance_rate;
  return HmcPosterior{head, std::move(run.samples)};
}

}  // namespace bnnsafe::bayes
