#pragma once

// Dense tanh MLP with hand-written reverse mode and Adam. All weight math in
// the library goes through this header.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spolab/errors.hpp"
#include "spolab/rng.hpp"

namespace spolab::grad {

using Vector = std::vector<double>;

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

/// One affine map; weight is out x in.
struct Layer {
  Matrix weight;
  Vector bias;

  bool operator==(const Layer&) const = default;
};

/// Parameters of a dense network. Hidden layers use tanh, the output layer is
/// the identity.
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Layer> layers;

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layers.size(); }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
    return n;
  }

  bool operator==(const MlpParams&) const = default;
};

/// Layers with every entry zero, shaped by layer_sizes.
inline std::vector<Layer> zero_layers(std::span<const std::size_t> layer_sizes) {
  if (layer_sizes.size() < 2) throw ShapeError("an MLP needs at least an input and an output size");
  std::vector<Layer> layers;
  layers.reserve(layer_sizes.size() - 1);
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    if (layer_sizes[k] == 0 || layer_sizes[k + 1] == 0) throw ShapeError("layer sizes must be positive");
    layers.push_back(Layer{Matrix(layer_sizes[k + 1], layer_sizes[k]), Vector(layer_sizes[k + 1], 0.0)});
  }
  return layers;
}

inline MlpParams make_zero_mlp(std::vector<std::size_t> layer_sizes) {
  MlpParams p;
  p.layers = zero_layers(layer_sizes);
  p.layer_sizes = std::move(layer_sizes);
  return p;
}

/// Throws ShapeError unless layer k maps size[k] -> size[k+1].
inline void validate_shapes(const MlpParams& p) {
  if (p.layer_sizes.size() != p.layers.size() + 1) throw ShapeError("layer_sizes and layers disagree");
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& l = p.layers[k];
    if (l.weight.rows != p.layer_sizes[k + 1] || l.weight.cols != p.layer_sizes[k] ||
        l.weight.data.size() != l.weight.rows * l.weight.cols || l.bias.size() != p.layer_sizes[k + 1]) {
      throw ShapeError("layer " + std::to_string(k) + " does not chain " + std::to_string(p.layer_sizes[k]) +
                       " -> " + std::to_string(p.layer_sizes[k + 1]));
    }
  }
}

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(const std::vector<Layer>& layers) {
  return std::all_of(layers.begin(), layers.end(),
                     [](const Layer& l) { return all_finite(l.weight.data) && all_finite(l.bias); });
}

/// dLoss/dParam, shape-identical to the parameters it belongs to.
struct GradBuffer {
  std::vector<Layer> layers;

  GradBuffer() = default;
  explicit GradBuffer(const MlpParams& p) : layers(zero_layers(p.layer_sizes)) {}

  void zero() {
    for (auto& l : layers) {
      std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
  }

  void scale(double s) {
    for (auto& l : layers) {
      for (auto& w : l.weight.data) w *= s;
      for (auto& b : l.bias) b *= s;
    }
  }

  bool is_zero() const {
    return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
      return std::all_of(l.weight.data.begin(), l.weight.data.end(), [](double x) { return x == 0.0; }) &&
             std::all_of(l.bias.begin(), l.bias.end(), [](double x) { return x == 0.0; });
    });
  }

  bool operator==(const GradBuffer&) const = default;
};

/// Initialization gains: hidden layers, then the output layer.
struct InitGains {
  double hidden = std::sqrt(2.0);
  double output = 1.0;
};

/// Orthogonal init: each weight matrix gets orthonormal rows or columns
/// (whichever is fewer) scaled by the gain; biases are zero.
inline MlpParams init_orthogonal(std::vector<std::size_t> layer_sizes, InitGains gains, Rng& rng) {
  MlpParams p = make_zero_mlp(std::move(layer_sizes));
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    Matrix& w = p.layers[k].weight;
    const double gain = (k + 1 == p.layers.size()) ? gains.output : gains.hidden;
    // Orthonormalize the short side of a Gaussian matrix with modified Gram-Schmidt.
    const std::size_t n = std::max(w.rows, w.cols);
    const std::size_t m = std::min(w.rows, w.cols);
    std::vector<Vector> basis(m, Vector(n));
    for (auto& v : basis)
      for (auto& x : v) x = rng.normal();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t t = 0; t < n; ++t) dot += basis[i][t] * basis[j][t];
        for (std::size_t t = 0; t < n; ++t) basis[i][t] -= dot * basis[j][t];
      }
      double norm = 0.0;
      for (double x : basis[i]) norm += x * x;
      norm = std::sqrt(norm);
      for (auto& x : basis[i]) x /= norm;
    }
    for (std::size_t r = 0; r < w.rows; ++r)
      for (std::size_t c = 0; c < w.cols; ++c)
        w(r, c) = gain * (w.rows <= w.cols ? basis[r][c] : basis[c][r]);
  }
  return p;
}

/// Layer outputs from one forward pass; activations[0] is the input.
struct ForwardCache {
  std::vector<Vector> activations;

  const Vector& output() const { return activations.back(); }
};

inline void forward(const MlpParams& p, std::span<const double> input, ForwardCache& cache) {
  if (input.size() != p.input_size()) {
    throw ShapeError("input has length " + std::to_string(input.size()) + ", network expects " +
                     std::to_string(p.input_size()));
  }
  cache.activations.resize(p.layers.size() + 1);
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const Layer& l = p.layers[k];
    const Vector& in = cache.activations[k];
    Vector& out = cache.activations[k + 1];
    out.resize(l.weight.rows);
    const bool hidden = k + 1 < p.layers.size();
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      const double* row = &l.weight.data[r * l.weight.cols];
      double acc = l.bias[r];
      for (std::size_t c = 0; c < l.weight.cols; ++c) acc += row[c] * in[c];
      out[r] = hidden ? std::tanh(acc) : acc;
    }
  }
}

inline Vector forward(const MlpParams& p, std::span<const double> input) {
  ForwardCache cache;
  forward(p, input, cache);
  return std::move(cache.activations.back());
}

/// Adds the parameter gradient of <output_grad, net(x)> to `grads`, using the
/// activations recorded by forward().
inline void accumulate_backward(const MlpParams& p, const ForwardCache& cache, std::span<const double> output_grad,
                                GradBuffer& grads) {
  if (output_grad.size() != p.output_size()) {
    throw ShapeError("output gradient has length " + std::to_string(output_grad.size()) + ", network emits " +
                     std::to_string(p.output_size()));
  }
  if (cache.activations.size() != p.layers.size() + 1) throw SequencingError("backward called without a forward cache");
  if (grads.layers.size() != p.layers.size()) throw ShapeError("gradient buffer does not match network");

  Vector delta(output_grad.begin(), output_grad.end());
  Vector prev;
  for (std::size_t k = p.layers.size(); k-- > 0;) {
    const Layer& l = p.layers[k];
    Layer& g = grads.layers[k];
    const Vector& in = cache.activations[k];
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      double* grow = &g.weight.data[r * l.weight.cols];
      for (std::size_t c = 0; c < l.weight.cols; ++c) grow[c] += d * in[c];
      g.bias[r] += d;
    }
    if (k == 0) break;
    prev.assign(l.weight.cols, 0.0);
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = &l.weight.data[r * l.weight.cols];
      for (std::size_t c = 0; c < l.weight.cols; ++c) prev[c] += row[c] * d;
    }
    // in = tanh(pre), so dtanh = 1 - in^2.
    for (std::size_t c = 0; c < prev.size(); ++c) prev[c] *= 1.0 - in[c] * in[c];
    delta.swap(prev);
  }
}

/// Gradient of <output_grad, net(input)> with respect to every parameter.
inline GradBuffer backward(const MlpParams& p, std::span<const double> input, std::span<const double> output_grad) {
  ForwardCache cache;
  forward(p, input, cache);
  GradBuffer g(p);
  accumulate_backward(p, cache, output_grad, g);
  return g;
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Layer> first_moment;
  std::vector<Layer> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const MlpParams& p, AdamConfig cfg = {})
      : first_moment(zero_layers(p.layer_sizes)),
        second_moment(zero_layers(p.layer_sizes)),
        beta1(cfg.beta1),
        beta2(cfg.beta2),
        epsilon(cfg.epsilon) {}

  bool operator==(const AdamState&) const = default;
};

namespace detail {

/// Bias-corrected Adam on one flat parameter block. `t` is the 1-based step.
inline void adam_block(std::span<double> param, std::span<const double> grad, std::span<double> m,
                       std::span<double> v, double lr, double beta1, double beta2, double eps, std::uint64_t t) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

}  // namespace detail

/// One Adam descent step. Gradients are checked before anything is touched.
inline void adam_step(MlpParams& p, const GradBuffer& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (grads.layers.size() != p.layers.size() || state.first_moment.size() != p.layers.size() ||
      state.second_moment.size() != p.layers.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const Layer& g = grads.layers[k];
    if (g.weight.data.size() != p.layers[k].weight.data.size() || g.bias.size() != p.layers[k].bias.size())
      throw ShapeError("adam_step: gradient layer " + std::to_string(k) + " has the wrong shape");
    if (!all_finite(g.weight.data)) throw PoisonedGradientError(k, "weight gradient is not finite");
    if (!all_finite(g.bias)) throw PoisonedGradientError(k, "bias gradient is not finite");
  }
  const std::uint64_t t = ++state.step;
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    Layer& w = p.layers[k];
    detail::adam_block(w.weight.data, grads.layers[k].weight.data, state.first_moment[k].weight.data,
                       state.second_moment[k].weight.data, lr, state.beta1, state.beta2, state.epsilon, t);
    detail::adam_block(w.bias, grads.layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias, lr,
                       state.beta1, state.beta2, state.epsilon, t);
  }
}

// ---- JSON checkpoint ---------------------------------------------------------

inline nlohmann::json layers_to_json(const std::vector<Layer>& layers, nlohmann::json& biases) {
  nlohmann::json weights = nlohmann::json::array();
  biases = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < l.weight.rows; ++r)
      rows.push_back(std::vector<double>(l.weight.data.begin() + static_cast<std::ptrdiff_t>(r * l.weight.cols),
                                         l.weight.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * l.weight.cols)));
    weights.push_back(std::move(rows));
    biases.push_back(l.bias);
  }
  return weights;
}

inline std::vector<Layer> layers_from_json(const std::vector<std::size_t>& sizes, const nlohmann::json& weights,
                                           const nlohmann::json& biases) {
  auto layers = zero_layers(sizes);
  if (weights.size() != layers.size() || biases.size() != layers.size())
    throw ShapeError("checkpoint layer count does not match layer_sizes");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& l = layers[k];
    if (weights[k].size() != l.weight.rows) throw ShapeError("checkpoint weight rows mismatch in layer " + std::to_string(k));
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      const auto row = weights[k][r].get<std::vector<double>>();
      if (row.size() != l.weight.cols) throw ShapeError("checkpoint weight cols mismatch in layer " + std::to_string(k));
      std::copy(row.begin(), row.end(), l.weight.data.begin() + static_cast<std::ptrdiff_t>(r * l.weight.cols));
    }
    l.bias = biases[k].get<Vector>();
    if (l.bias.size() != l.weight.rows) throw ShapeError("checkpoint bias size mismatch in layer " + std::to_string(k));
  }
  return layers;
}

/// {layer_sizes, weights, biases, adam_state, step}
inline nlohmann::json to_json(const MlpParams& p, const AdamState& adam) {
  nlohmann::json j;
  j["layer_sizes"] = p.layer_sizes;
  nlohmann::json biases;
  j["weights"] = layers_to_json(p.layers, biases);
  j["biases"] = std::move(biases);
  nlohmann::json a;
  nlohmann::json mb, vb;
  a["first_moment"] = {{"weights", layers_to_json(adam.first_moment, mb)}, {"biases", mb}};
  a["second_moment"] = {{"weights", layers_to_json(adam.second_moment, vb)}, {"biases", vb}};
  a["beta1"] = adam.beta1;
  a["beta2"] = adam.beta2;
  a["epsilon"] = adam.epsilon;
  j["adam_state"] = std::move(a);
  j["step"] = adam.step;
  return j;
}

struct Checkpoint {
  MlpParams params;
  AdamState adam;
};

inline Checkpoint from_json(const nlohmann::json& j) {
  Checkpoint c;
  c.params.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  c.params.layers = layers_from_json(c.params.layer_sizes, j.at("weights"), j.at("biases"));
  const auto& a = j.at("adam_state");
  c.adam.first_moment =
      layers_from_json(c.params.layer_sizes, a.at("first_moment").at("weights"), a.at("first_moment").at("biases"));
  c.adam.second_moment =
      layers_from_json(c.params.layer_sizes, a.at("second_moment").at("weights"), a.at("second_moment").at("biases"));
  c.adam.beta1 = a.at("beta1").get<double>();
  c.adam.beta2 = a.at("beta2").get<double>();
  c.adam.epsilon = a.at("epsilon").get<double>();
  c.adam.step = j.at("step").get<std::uint64_t>();
  if (!all_finite(c.params.layers)) throw DomainError("checkpoint contains non-finite parameters");
  return c;
}

}  // namespace spolab::grad
