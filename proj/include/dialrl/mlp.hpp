#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialrl/common.hpp"
#include "dialrl/rng.hpp"

namespace dialrl {

enum class Activation { identity, tanh, relu, sigmoid, softmax };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  throw UsageError("unknown activation");
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw UsageError("unknown activation name: " + s);
}

/// Fully connected network. Layer k maps layer_sizes[k] inputs to
/// layer_sizes[k+1] outputs; weights[k] is row-major (out x in).
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  Activation hidden_activation = Activation::tanh;
  Activation output_activation = Activation::identity;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      n += weights[k].size() + biases[k].size();
    return n;
  }

  void validate() const {
    require(layer_sizes.size() >= 2, "Mlp: need at least input and output layer");
    for (int s : layer_sizes) require(s > 0, "Mlp: layer sizes must be positive");
    require(weights.size() == layer_sizes.size() - 1, "Mlp: weight count mismatch");
    require(biases.size() == weights.size(), "Mlp: bias count mismatch");
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const std::size_t rows = static_cast<std::size_t>(layer_sizes[k + 1]);
      const std::size_t cols = static_cast<std::size_t>(layer_sizes[k]);
      require(weights[k].size() == rows * cols, "Mlp: weight shape mismatch at layer " + std::to_string(k));
      require(biases[k].size() == rows, "Mlp: bias shape mismatch at layer " + std::to_string(k));
      require(all_finite(weights[k]) && all_finite(biases[k]),
              "Mlp: non-finite parameter at layer " + std::to_string(k));
    }
  }
};

/// Gradients (or any other tensor set) shaped like an Mlp's parameters.
struct MlpGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGradients zeros_like(const Mlp& m) {
    MlpGradients g;
    g.weights.reserve(m.weights.size());
    g.biases.reserve(m.biases.size());
    for (std::size_t k = 0; k < m.weights.size(); ++k) {
      g.weights.emplace_back(m.weights[k].size(), 0.0);
      g.biases.emplace_back(m.biases[k].size(), 0.0);
    }
    return g;
  }

  void accumulate(const MlpGradients& other, double scale = 1.0) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      for (std::size_t i = 0; i < weights[k].size(); ++i) weights[k][i] += scale * other.weights[k][i];
      for (std::size_t i = 0; i < biases[k].size(); ++i) biases[k][i] += scale * other.biases[k][i];
    }
  }

  void scale(double s) {
    for (auto& w : weights)
      for (double& x : w) x *= s;
    for (auto& b : biases)
      for (double& x : b) x *= s;
  }

  bool finite() const {
    for (const auto& w : weights)
      if (!all_finite(w)) return false;
    for (const auto& b : biases)
      if (!all_finite(b)) return false;
    return true;
  }
};

/// Per-layer pre-activations and activations from one forward pass.
/// post[0] is the input; pre[k]/post[k+1] belong to layer k.
struct ForwardCache {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

namespace detail {

inline void apply_activation(Activation a, const std::vector<double>& z, std::vector<double>& out) {
  out.resize(z.size());
  switch (a) {
    case Activation::identity:
      out = z;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-z[i]));
      break;
    case Activation::softmax: {
      double m = z[0];
      for (double v : z) m = std::max(m, v);
      double sum = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
      }
      for (double& v : out) v /= sum;
      break;
    }
  }
}

/// Given dL/dpost of one layer, produce dL/dpre in place.
inline void activation_backward(Activation a, const std::vector<double>& pre,
                                const std::vector<double>& post, std::vector<double>& grad) {
  switch (a) {
    case Activation::identity:
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - post[i] * post[i];
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (pre[i] <= 0.0) grad[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= post[i] * (1.0 - post[i]);
      break;
    case Activation::softmax: {
      // dL/dz_j = y_j * (g_j - sum_k g_k y_k)
      double dot = 0.0;
      for (std::size_t k = 0; k < grad.size(); ++k) dot += grad[k] * post[k];
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = post[j] * (grad[j] - dot);
      break;
    }
  }
}

}  // namespace detail

inline std::vector<double> mlp_forward(const Mlp& m, std::span<const double> input,
                                       ForwardCache* cache = nullptr) {
  require(static_cast<int>(input.size()) == m.input_size(),
          "mlp_forward: input size " + std::to_string(input.size()) + " does not match first layer " +
              std::to_string(m.input_size()));
  std::vector<double> cur(input.begin(), input.end());
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(cur);
  }
  std::vector<double> z, act;
  const std::size_t L = m.layer_count();
  for (std::size_t k = 0; k < L; ++k) {
    const int rows = m.layer_sizes[k + 1];
    const int cols = m.layer_sizes[k];
    z.assign(static_cast<std::size_t>(rows), 0.0);
    const double* w = m.weights[k].data();
    for (int r = 0; r < rows; ++r) {
      double acc = m.biases[k][static_cast<std::size_t>(r)];
      const double* wr = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += wr[c] * cur[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    const Activation a = (k + 1 == L) ? m.output_activation : m.hidden_activation;
    detail::apply_activation(a, z, act);
    if (cache) {
      cache->pre.push_back(z);
      cache->post.push_back(act);
    }
    cur = act;
  }
  return cur;
}

namespace detail {

inline MlpGradients backprop(const Mlp& m, const ForwardCache& cache, std::vector<double> delta) {
  // delta on entry: dL/dpre of the output layer.
  MlpGradients g = MlpGradients::zeros_like(m);
  const std::size_t L = m.layer_count();
  for (std::size_t k = L; k-- > 0;) {
    const int rows = m.layer_sizes[k + 1];
    const int cols = m.layer_sizes[k];
    const std::vector<double>& below = cache.post[k];
    for (int r = 0; r < rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      g.biases[k][static_cast<std::size_t>(r)] = d;
      double* gw = g.weights[k].data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) gw[c] = d * below[static_cast<std::size_t>(c)];
    }
    if (k == 0) break;
    std::vector<double> next(static_cast<std::size_t>(cols), 0.0);
    const double* w = m.weights[k].data();
    for (int r = 0; r < rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      const double* wr = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) next[static_cast<std::size_t>(c)] += d * wr[c];
    }
    activation_backward(m.hidden_activation, cache.pre[k - 1], cache.post[k], next);
    delta = std::move(next);
  }
  return g;
}

inline void check_cache(const Mlp& m, const ForwardCache& cache) {
  require(cache.post.size() == m.layer_count() + 1 && cache.pre.size() == m.layer_count(),
          "mlp_backward: cache does not match network depth");
  for (std::size_t k = 0; k < cache.pre.size(); ++k) {
    require(cache.pre[k].size() == static_cast<std::size_t>(m.layer_sizes[k + 1]),
            "mlp_backward: cache shape mismatch at layer " + std::to_string(k));
  }
  require(cache.post[0].size() == static_cast<std::size_t>(m.layer_sizes[0]),
          "mlp_backward: cached input shape mismatch");
}

}  // namespace detail

/// Backward pass from the gradient of the loss w.r.t. the network OUTPUT
/// (post output activation). The cache must come from a forward pass over the
/// same parameters.
inline MlpGradients mlp_backward(const Mlp& m, const ForwardCache& cache,
                                 std::span<const double> output_gradient) {
  detail::check_cache(m, cache);
  require(static_cast<int>(output_gradient.size()) == m.output_size(),
          "mlp_backward: output gradient size mismatch");
  std::vector<double> delta(output_gradient.begin(), output_gradient.end());
  detail::activation_backward(m.output_activation, cache.pre.back(), cache.post.back(), delta);
  return detail::backprop(m, cache, std::move(delta));
}

/// Backward pass from the gradient w.r.t. the output PRE-activation (logits).
/// Losses paired with sigmoid/softmax heads use this form for numerical
/// stability (e.g. softmax cross-entropy delta = probs - onehot).
inline MlpGradients mlp_backward_logits(const Mlp& m, const ForwardCache& cache,
                                        std::span<const double> logit_gradient) {
  detail::check_cache(m, cache);
  require(static_cast<int>(logit_gradient.size()) == m.output_size(),
          "mlp_backward_logits: gradient size mismatch");
  return detail::backprop(m, cache, std::vector<double>(logit_gradient.begin(), logit_gradient.end()));
}

/// Uniform Glorot-style init in [-sqrt(6/(fan_in+fan_out)), +...]; biases zero.
inline Mlp make_mlp(std::vector<int> layer_sizes, Activation hidden, Activation output, Rng& rng) {
  Mlp m;
  m.layer_sizes = std::move(layer_sizes);
  m.hidden_activation = hidden;
  m.output_activation = output;
  for (std::size_t k = 0; k + 1 < m.layer_sizes.size(); ++k) {
    const int fan_in = m.layer_sizes[k];
    const int fan_out = m.layer_sizes[k + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& x : w) x = rng.uniform(-bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
  long step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const Mlp& params, double lr) {
    AdamState s;
    s.learning_rate = lr;
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
      s.m_weights.emplace_back(params.weights[k].size(), 0.0);
      s.v_weights.emplace_back(params.weights[k].size(), 0.0);
      s.m_biases.emplace_back(params.biases[k].size(), 0.0);
      s.v_biases.emplace_back(params.biases[k].size(), 0.0);
    }
    return s;
  }
};

namespace detail {

inline void adam_update(std::vector<double>& p, std::vector<double>& m, std::vector<double>& v,
                        const std::vector<double>& g, double lr, double b1, double b2, double eps,
                        double bc1, double bc2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace detail

/// One bias-corrected Adam update. Rejects non-finite gradients.
inline void adam_step(AdamState& state, Mlp& params, const MlpGradients& grads) {
  require(grads.weights.size() == params.weights.size(), "adam_step: gradient shape mismatch");
  if (!grads.finite())
    throw NumericError("adam_step: non-finite gradient at step " + std::to_string(state.step_count + 1));
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    require(grads.weights[k].size() == params.weights[k].size() &&
                grads.biases[k].size() == params.biases[k].size(),
            "adam_step: gradient shape mismatch at layer " + std::to_string(k));
    detail::adam_update(params.weights[k], state.m_weights[k], state.v_weights[k], grads.weights[k],
                        state.learning_rate, state.beta1, state.beta2, state.epsilon, bc1, bc2);
    detail::adam_update(params.biases[k], state.m_biases[k], state.v_biases[k], grads.biases[k],
                        state.learning_rate, state.beta1, state.beta2, state.epsilon, bc1, bc2);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint format: versioned JSON, bit-exact for IEEE-754 doubles.
// ---------------------------------------------------------------------------

inline nlohmann::json mlp_to_json(const Mlp& m) {
  nlohmann::json j;
  j["format"] = "dialrl-mlp";
  j["version"] = 1;
  j["layer_sizes"] = m.layer_sizes;
  j["hidden_activation"] = activation_name(m.hidden_activation);
  j["output_activation"] = activation_name(m.output_activation);
  j["weights"] = m.weights;
  j["biases"] = m.biases;
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  require(j.value("format", "") == "dialrl-mlp", "checkpoint: not an mlp blob");
  require(j.value("version", 0) == 1, "checkpoint: unsupported version");
  Mlp m;
  j.at("layer_sizes").get_to(m.layer_sizes);
  m.hidden_activation = activation_from_name(j.at("hidden_activation").get<std::string>());
  m.output_activation = activation_from_name(j.at("output_activation").get<std::string>());
  j.at("weights").get_to(m.weights);
  j.at("biases").get_to(m.biases);
  m.validate();
  return m;
}

// Flat parameter views used by gradient checks and hashes.

inline std::vector<double> flatten_params(const Mlp& m) {
  std::vector<double> out;
  out.reserve(m.param_count());
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    out.insert(out.end(), m.weights[k].begin(), m.weights[k].end());
    out.insert(out.end(), m.biases[k].begin(), m.biases[k].end());
  }
  return out;
}

inline void unflatten_params(Mlp& m, std::span<const double> flat) {
  require(flat.size() == m.param_count(), "unflatten_params: size mismatch");
  std::size_t i = 0;
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    for (double& x : m.weights[k]) x = flat[i++];
    for (double& x : m.biases[k]) x = flat[i++];
  }
}

inline std::vector<double> flatten_grads(const MlpGradients& g) {
  std::vector<double> out;
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    out.insert(out.end(), g.weights[k].begin(), g.weights[k].end());
    out.insert(out.end(), g.biases[k].begin(), g.biases[k].end());
  }
  return out;
}

}  // namespace dialrl
