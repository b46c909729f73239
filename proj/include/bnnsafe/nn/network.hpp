#pragma once

// Dense / convolutional network math over flat weight vectors.
//
// Activation layout is row-major (rows, cols, channels). Parameters are laid
// out layer by layer, weights first and then biases:
//   convolution      W[filter][ky][kx][channel], b[filter]
//   fully-connected  W[out][in],                 b[out]
// Dropout applies to a layer's input with inverted scaling 1/(1-rate).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnnsafe/nn/tensor.hpp"
#include "bnnsafe/rng.hpp"

namespace bnnsafe::nn {

using WeightVector = std::vector<double>;

enum class LayerKind { convolution, fully_connected, relu, flatten };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::convolution: return "convolution";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "convolution") return LayerKind::convolution;
  if (s == "fully_connected") return LayerKind::fully_connected;
  if (s == "relu") return LayerKind::relu;
  if (s == "flatten") return LayerKind::flatten;
  throw std::invalid_argument("unknown layer kind '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  int width = 0;
  double dropout_rate = 0.0;

  static LayerSpec conv(int filters, int kernel, int stride, double dropout = 0.0) {
    return {LayerKind::convolution, filters, kernel, stride, 0, dropout};
  }
  static LayerSpec dense(int width, double dropout = 0.0) {
    return {LayerKind::fully_connected, 0, 0, 1, width, dropout};
  }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0, 1, 0, 0.0}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, 1, 0, 0.0}; }

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Shape input_shape;
  int num_classes = 20;

  bool operator==(const NetworkSpec&) const = default;
};

struct DropoutMask {
  // One entry per layer; empty where the layer has no dropout.
  std::vector<std::vector<std::uint8_t>> layers;

  bool operator==(const DropoutMask&) const = default;
};

struct LayerPlan {
  Shape in;
  Shape out;
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;
};

// A validated spec with resolved shapes and parameter offsets.
class CompiledNetwork {
 public:
  explicit CompiledNetwork(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.input_shape.empty()) throw std::invalid_argument("network input shape is empty");
    Shape shape = spec_.input_shape;
    for (int e : shape)
      if (e <= 0) throw std::invalid_argument("network input extents must be positive");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const LayerSpec& L = spec_.layers[i];
      const std::string where = "layer " + std::to_string(i) + " (" + to_string(L.kind) + "): ";
      if (!(L.dropout_rate >= 0.0 && L.dropout_rate < 1.0))
        throw std::invalid_argument(where + "dropout rate must lie in [0,1)");
      LayerPlan p;
      p.in = shape;
      p.in_size = element_count(shape);
      switch (L.kind) {
        case LayerKind::convolution: {
          if (shape.size() != 3) throw std::invalid_argument(where + "expects rank-3 input, got " + to_string(shape));
          if (L.kernel <= 0 || L.stride <= 0 || L.filters <= 0)
            throw std::invalid_argument(where + "kernel, stride and filter count must be positive");
          if (shape[0] < L.kernel || shape[1] < L.kernel)
            throw std::invalid_argument(where + "kernel larger than input " + to_string(shape));
          p.out = {(shape[0] - L.kernel) / L.stride + 1, (shape[1] - L.kernel) / L.stride + 1, L.filters};
          p.weight_count = static_cast<std::size_t>(L.filters) * L.kernel * L.kernel * shape[2];
          p.bias_count = static_cast<std::size_t>(L.filters);
          break;
        }
        case LayerKind::fully_connected: {
          if (shape.size() != 1) throw std::invalid_argument(where + "expects rank-1 input, got " + to_string(shape));
          if (L.width <= 0) throw std::invalid_argument(where + "width must be positive");
          p.out = {L.width};
          p.weight_count = static_cast<std::size_t>(L.width) * shape[0];
          p.bias_count = static_cast<std::size_t>(L.width);
          break;
        }
        case LayerKind::relu: p.out = shape; break;
        case LayerKind::flatten: p.out = {static_cast<int>(p.in_size)}; break;
      }
      p.out_size = element_count(p.out);
      p.weight_offset = offset;
      p.bias_offset = offset + p.weight_count;
      offset += p.weight_count + p.bias_count;
      plans_.push_back(std::move(p));
      shape = plans_.back().out;
    }
    if (shape.size() != 1 || shape[0] != spec_.num_classes)
      throw std::invalid_argument("network output " + to_string(shape) + " does not match num_classes " +
                                  std::to_string(spec_.num_classes));
    parameter_count_ = offset;
  }

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<LayerPlan>& layers() const { return plans_; }
  std::size_t parameter_count() const { return parameter_count_; }
  std::size_t input_size() const { return element_count(spec_.input_shape); }

  // Parameter offset of the first parameter belonging to layer `i` (or the
  // total count when i == layer count).
  std::size_t parameter_offset(std::size_t i) const {
    return i < plans_.size() ? plans_[i].weight_offset : parameter_count_;
  }

 private:
  NetworkSpec spec_;
  std::vector<LayerPlan> plans_;
  std::size_t parameter_count_ = 0;
};

inline std::size_t parameter_count(const NetworkSpec& spec) { return CompiledNetwork(spec).parameter_count(); }

namespace detail {

inline void check_weights(const CompiledNetwork& net, std::span<const double> w) {
  if (w.size() != net.parameter_count())
    throw std::invalid_argument("weight vector length " + std::to_string(w.size()) + " does not match parameter count " +
                                std::to_string(net.parameter_count()));
}

inline void check_mask(const CompiledNetwork& net, const DropoutMask& mask, std::size_t begin, std::size_t end) {
  if (mask.layers.size() != net.layers().size())
    throw std::invalid_argument("dropout mask layer count does not match network");
  for (std::size_t i = begin; i < end; ++i) {
    const double rate = net.spec().layers[i].dropout_rate;
    const std::size_t expected = rate > 0.0 ? net.layers()[i].in_size : 0;
    if (mask.layers[i].size() != expected)
      throw std::invalid_argument("dropout mask for layer " + std::to_string(i) + " has length " +
                                  std::to_string(mask.layers[i].size()) + ", expected " + std::to_string(expected));
  }
}

inline void apply_mask(std::vector<double>& x, const std::vector<std::uint8_t>& m, double rate) {
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = m[j] ? x[j] * scale : 0.0;
}

inline void layer_forward(const LayerSpec& L, const LayerPlan& p, std::span<const double> w,
                          const std::vector<double>& x, std::vector<double>& y) {
  y.assign(p.out_size, 0.0);
  switch (L.kind) {
    case LayerKind::convolution: {
      const int in_cols = p.in[1], C = p.in[2];
      const int out_rows = p.out[0], out_cols = p.out[1], F = p.out[2];
      const int k = L.kernel, s = L.stride;
      const std::size_t row_span = static_cast<std::size_t>(k) * C;
      const double* W = w.data() + p.weight_offset;
      const double* B = w.data() + p.bias_offset;
      for (int oy = 0; oy < out_rows; ++oy)
        for (int ox = 0; ox < out_cols; ++ox) {
          double* out = &y[(static_cast<std::size_t>(oy) * out_cols + ox) * F];
          for (int f = 0; f < F; ++f) {
            const double* wf = W + static_cast<std::size_t>(f) * k * row_span;
            double acc = B[f];
            for (int ky = 0; ky < k; ++ky) {
              const double* xin = &x[(static_cast<std::size_t>(oy * s + ky) * in_cols + ox * s) * C];
              const double* wk = wf + ky * row_span;
              for (std::size_t j = 0; j < row_span; ++j) acc += xin[j] * wk[j];
            }
            out[f] = acc;
          }
        }
      break;
    }
    case LayerKind::fully_connected: {
      const std::size_t n_in = p.in_size, n_out = p.out_size;
      const double* W = w.data() + p.weight_offset;
      const double* B = w.data() + p.bias_offset;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double* row = W + o * n_in;
        double acc = B[o];
        for (std::size_t j = 0; j < n_in; ++j) acc += row[j] * x[j];
        y[o] = acc;
      }
      break;
    }
    case LayerKind::relu:
      for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
      break;
    case LayerKind::flatten: y = x; break;
  }
}

// Propagates `gy` (gradient wrt the layer output) to `gx` (wrt the effective
// input `x`) and accumulates parameter gradients into `gw`.
inline void layer_backward(const LayerSpec& L, const LayerPlan& p, std::span<const double> w,
                           const std::vector<double>& x, const std::vector<double>& gy, std::vector<double>& gx,
                           std::span<double> gw, bool need_gx) {
  gx.assign(p.in_size, 0.0);
  switch (L.kind) {
    case LayerKind::convolution: {
      const int in_cols = p.in[1], C = p.in[2];
      const int out_rows = p.out[0], out_cols = p.out[1], F = p.out[2];
      const int k = L.kernel, s = L.stride;
      const std::size_t row_span = static_cast<std::size_t>(k) * C;
      const double* W = w.data() + p.weight_offset;
      double* GW = gw.data() + p.weight_offset;
      double* GB = gw.data() + p.bias_offset;
      for (int oy = 0; oy < out_rows; ++oy)
        for (int ox = 0; ox < out_cols; ++ox) {
          const double* g = &gy[(static_cast<std::size_t>(oy) * out_cols + ox) * F];
          for (int f = 0; f < F; ++f) {
            const double gf = g[f];
            if (gf == 0.0) continue;
            GB[f] += gf;
            const std::size_t wf = static_cast<std::size_t>(f) * k * row_span;
            for (int ky = 0; ky < k; ++ky) {
              const std::size_t xi = (static_cast<std::size_t>(oy * s + ky) * in_cols + ox * s) * C;
              const std::size_t wk = wf + ky * row_span;
              for (std::size_t j = 0; j < row_span; ++j) {
                GW[wk + j] += gf * x[xi + j];
                if (need_gx) gx[xi + j] += gf * W[wk + j];
              }
            }
          }
        }
      break;
    }
    case LayerKind::fully_connected: {
      const std::size_t n_in = p.in_size, n_out = p.out_size;
      const double* W = w.data() + p.weight_offset;
      double* GW = gw.data() + p.weight_offset;
      double* GB = gw.data() + p.bias_offset;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double g = gy[o];
        GB[o] += g;
        if (g == 0.0) continue;
        double* grow = GW + o * n_in;
        const double* row = W + o * n_in;
        for (std::size_t j = 0; j < n_in; ++j) grow[j] += g * x[j];
        if (need_gx)
          for (std::size_t j = 0; j < n_in; ++j) gx[j] += g * row[j];
      }
      break;
    }
    case LayerKind::relu:
      for (std::size_t j = 0; j < x.size(); ++j) gx[j] = x[j] > 0.0 ? gy[j] : 0.0;
      break;
    case LayerKind::flatten: gx = gy; break;
  }
}

// Runs layers [begin, end). When `inputs` is given it receives each layer's
// effective (post-dropout) input.
inline std::vector<double> run_layers(const CompiledNetwork& net, std::span<const double> w,
                                      std::vector<double> x, const DropoutMask* mask, std::size_t begin,
                                      std::size_t end, std::vector<std::vector<double>>* inputs = nullptr) {
  std::vector<double> y;
  for (std::size_t i = begin; i < end; ++i) {
    const LayerSpec& L = net.spec().layers[i];
    if (mask && L.dropout_rate > 0.0) apply_mask(x, mask->layers[i], L.dropout_rate);
    layer_forward(L, net.layers()[i], w, x, y);
    if (inputs) (*inputs)[i] = std::move(x);
    x = std::move(y);
  }
  return x;
}

}  // namespace detail

inline Tensor forward(const CompiledNetwork& net, std::span<const double> w, const Tensor& input,
                      const DropoutMask* mask = nullptr) {
  if (input.shape() != net.spec().input_shape)
    throw std::invalid_argument("input shape " + to_string(input.shape()) + " does not match network input " +
                                to_string(net.spec().input_shape));
  detail::check_weights(net, w);
  if (mask) detail::check_mask(net, *mask, 0, net.layers().size());
  auto out = detail::run_layers(net, w, input.data(), mask, 0, net.layers().size());
  if (!all_finite(out)) throw std::runtime_error("forward produced non-finite logits");
  return Tensor({net.spec().num_classes}, std::move(out));
}

inline Tensor forward(const NetworkSpec& spec, std::span<const double> w, const Tensor& input,
                      const DropoutMask* mask = nullptr) {
  return forward(CompiledNetwork(spec), w, input, mask);
}

// Numerically stable softmax (max subtraction).
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw std::out_of_range("label " + std::to_string(label) + " outside [0, " + std::to_string(probs.size()) + ")");
  return -std::log(probs[label] + kProbabilityFloor);
}

struct LossGradient {
  double loss = 0.0;
  WeightVector grad;
};

// Gradient of cross_entropy(softmax(forward(.))) wrt the weights. The loss
// uses the same probability floor as cross_entropy; the gradient is the exact
// softmax-minus-one-hot form.
inline LossGradient backward(const CompiledNetwork& net, std::span<const double> w, const Tensor& input, int label,
                             const DropoutMask* mask = nullptr) {
  if (input.shape() != net.spec().input_shape)
    throw std::invalid_argument("input shape " + to_string(input.shape()) + " does not match network input " +
                                to_string(net.spec().input_shape));
  detail::check_weights(net, w);
  const std::size_t n_layers = net.layers().size();
  if (mask) detail::check_mask(net, *mask, 0, n_layers);
  if (label < 0 || label >= net.spec().num_classes)
    throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(net.spec().num_classes) + ")");

  std::vector<std::vector<double>> inputs(n_layers);
  const auto logits = detail::run_layers(net, w, input.data(), mask, 0, n_layers, &inputs);
  if (!all_finite(logits)) throw std::runtime_error("forward produced non-finite logits");
  const auto probs = softmax(logits);

  LossGradient out;
  out.loss = cross_entropy(probs, label);
  out.grad.assign(net.parameter_count(), 0.0);

  std::vector<double> g = probs;
  g[label] -= 1.0;
  // Input gradients at or below the first parameterized layer are never used.
  std::size_t first_param = n_layers;
  for (std::size_t j = 0; j < n_layers; ++j)
    if (net.layers()[j].weight_count > 0) {
      first_param = j;
      break;
    }
  std::vector<double> gx;
  for (std::size_t i = n_layers; i-- > 0;) {
    const LayerSpec& L = net.spec().layers[i];
    detail::layer_backward(L, net.layers()[i], w, inputs[i], g, gx, out.grad, i > first_param);
    if (mask && L.dropout_rate > 0.0) detail::apply_mask(gx, mask->layers[i], L.dropout_rate);
    g = std::move(gx);
    gx.clear();
  }
  return out;
}

inline LossGradient backward(const NetworkSpec& spec, std::span<const double> w, const Tensor& input, int label,
                             const DropoutMask* mask = nullptr) {
  return backward(CompiledNetwork(spec), w, input, label, mask);
}

inline DropoutMask sample_dropout_mask(const CompiledNetwork& net, Rng& rng) {
  DropoutMask mask;
  mask.layers.resize(net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const double rate = net.spec().layers[i].dropout_rate;
    if (rate <= 0.0) continue;
    std::bernoulli_distribution keep(1.0 - rate);
    auto& m = mask.layers[i];
    m.resize(net.layers()[i].in_size);
    for (auto& e : m) e = keep(rng) ? 1 : 0;
  }
  return mask;
}

inline DropoutMask sample_dropout_mask(const NetworkSpec& spec, Rng& rng) {
  return sample_dropout_mask(CompiledNetwork(spec), rng);
}

// He-uniform weights, zero biases.
inline WeightVector init_weights(const CompiledNetwork& net, Rng& rng) {
  WeightVector w(net.parameter_count(), 0.0);
  for (const LayerPlan& p : net.layers()) {
    if (p.weight_count == 0) continue;
    const std::size_t fan_in = p.weight_count / p.bias_count;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t j = 0; j < p.weight_count; ++j) w[p.weight_offset + j] = u(rng);
  }
  return w;
}

inline WeightVector init_weights(const NetworkSpec& spec, Rng& rng) { return init_weights(CompiledNetwork(spec), rng); }

}  // namespace bnnsafe::nn
