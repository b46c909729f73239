#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bnnsafe/nn/tensor.hpp"

namespace bnnsafe::nn {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n, double learning_rate = 1e-4) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.learning_rate = learning_rate;
    return s;
  }
};

// One bias-corrected ADAM descent step, in place.
inline void adam_step(AdamState& state, std::span<double> w, std::span<const double> grad) {
  if (w.size() != grad.size() || state.m.size() != w.size() || state.v.size() != w.size())
    throw std::invalid_argument("adam_step: weight, gradient and moment lengths differ");
  if (!all_finite(grad)) throw std::invalid_argument("adam_step: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace bnnsafe::nn
