/**
 * Copyright 2026 The SSHT Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssht/error.hpp"
#include "ssht/linalg.hpp"
#include "ssht/rng.hpp"

namespace ssht {

enum class Activation { kTanh, kRelu };

inline std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ValidationError("unknown activation '" + s + "'");
}

/// Feature extractor (hidden_dims..., feature_dim, all activated) followed by
/// a linear classifier feature_dim -> num_classes.
struct NetworkSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t feature_dim = 16;
  std::size_t num_classes = 4;
  Activation activation = Activation::kTanh;

  void validate() const {
    SSHT_REQUIRE(input_dim > 0, "input_dim must be positive");
    SSHT_REQUIRE(!hidden_dims.empty(), "hidden_dims must be non-empty");
    for (auto h : hidden_dims) SSHT_REQUIRE(h > 0, "hidden layer widths must be positive");
    SSHT_REQUIRE(feature_dim > 0, "feature_dim must be positive");
    SSHT_REQUIRE(num_classes >= 2, "num_classes must be at least 2, got ", num_classes);
  }

  /// Layer widths from input to logits.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
    w.push_back(feature_dim);
    w.push_back(num_classes);
    return w;
  }

  std::size_t num_layers() const { return hidden_dims.size() + 2; }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Parameters are stored as [W_0, b_0, W_1, b_1, ...]; W_l is fan_in x fan_out
/// and b_l is 1 x fan_out. The last pair is the classifier.
struct Network {
  NetworkSpec spec;
  std::vector<Matrix> params;
  std::uint64_t seed = 0;
  /// Free-form annotations carried through the model file header.
  std::map<std::string, std::string> info;

  std::size_t num_layers() const { return params.size() / 2; }
  const Matrix& weight(std::size_t layer) const { return params[2 * layer]; }
  const Matrix& bias(std::size_t layer) const { return params[2 * layer + 1]; }

  std::string param_name(std::size_t index) const {
    const std::size_t layer = index / 2;
    const std::string prefix =
        layer + 1 == num_layers() ? std::string("classifier") : "layer" + std::to_string(layer);
    return prefix + (index % 2 == 0 ? ".weight" : ".bias");
  }

  bool is_classifier_param(std::size_t index) const { return index / 2 + 1 == num_layers(); }

  void validate() const {
    spec.validate();
    const auto w = spec.widths();
    SSHT_REQUIRE(params.size() == 2 * (w.size() - 1), "network has ", params.size(),
                 " parameter tensors, spec needs ", 2 * (w.size() - 1));
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      SSHT_REQUIRE(params[2 * l].rows() == w[l] && params[2 * l].cols() == w[l + 1],
                   param_name(2 * l), " has shape ", params[2 * l].rows(), "x",
                   params[2 * l].cols(), ", expected ", w[l], "x", w[l + 1]);
      SSHT_REQUIRE(params[2 * l + 1].rows() == 1 && params[2 * l + 1].cols() == w[l + 1],
                   param_name(2 * l + 1), " has shape ", params[2 * l + 1].rows(), "x",
                   params[2 * l + 1].cols(), ", expected 1x", w[l + 1]);
    }
    for (std::size_t i = 0; i < params.size(); ++i)
      SSHT_REQUIRE(params[i].all_finite(), param_name(i), " has non-finite entries");
  }
};

/// One gradient tensor per parameter tensor, same order and shapes.
struct GradientSet {
  std::vector<Matrix> grads;

  static GradientSet zeros_like(const Network& net) {
    GradientSet g;
    g.grads.reserve(net.params.size());
    for (const auto& p : net.params) g.grads.emplace_back(p.rows(), p.cols());
    return g;
  }

  GradientSet& operator+=(const GradientSet& o) {
    SSHT_REQUIRE(grads.size() == o.grads.size(), "gradient sets differ in length");
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += o.grads[i];
    return *this;
  }

  GradientSet& add_scaled(const GradientSet& o, double s) {
    SSHT_REQUIRE(grads.size() == o.grads.size(), "gradient sets differ in length");
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i].add_scaled(o.grads[i], s);
    return *this;
  }
};

/// Glorot-uniform weights, zero biases.
inline Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net{spec, {}, seed, {}};
  Rng rng = make_rng(seed, Stream::kInit);
  const auto w = spec.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix weight(w[l], w[l + 1]);
    for (double& x : weight.data()) x = dist(rng);
    net.params.push_back(std::move(weight));
    net.params.emplace_back(1, w[l + 1]);
  }
  return net;
}

/// Activations of every layer, kept for the backward pass.
struct Tape {
  std::vector<Matrix> inputs;  // inputs[l] feeds layer l; inputs[0] is the batch
  Matrix logits;

  const Matrix& features() const { return inputs.back(); }
};

struct ForwardResult {
  Matrix features;
  Matrix logits;
};

inline Tape forward_tape(const Network& net, const Matrix& x) {
  SSHT_REQUIRE(!x.empty() && x.cols() == net.spec.input_dim, "forward: batch has ", x.cols(),
               " columns, network expects ", net.spec.input_dim);
  Tape tape;
  tape.inputs.reserve(net.num_layers());
  tape.inputs.push_back(x);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = matmul(tape.inputs.back(), net.weight(l));
    const auto b = net.bias(l).row(0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto zi = z.row(i);
      for (std::size_t j = 0; j < zi.size(); ++j) zi[j] += b[j];
    }
    if (l + 1 == net.num_layers()) {
      tape.logits = std::move(z);
    } else {
      for (double& v : z.data())
        v = net.spec.activation == Activation::kTanh ? std::tanh(v) : std::max(v, 0.0);
      tape.inputs.push_back(std::move(z));
    }
  }
  return tape;
}

inline ForwardResult forward(const Network& net, const Matrix& x) {
  Tape t = forward_tape(net, x);
  return {std::move(t.inputs.back()), std::move(t.logits)};
}

/// Reverse-mode gradient of any loss whose gradient at the logits is
/// `logit_grad`, using activations recorded by forward_tape.
inline GradientSet backward(const Network& net, const Tape& tape, const Matrix& logit_grad) {
  SSHT_REQUIRE(logit_grad.same_shape(tape.logits), "backward: logit gradient is ",
               logit_grad.rows(), "x", logit_grad.cols(), ", logits are ", tape.logits.rows(),
               "x", tape.logits.cols());
  GradientSet g;
  g.grads.resize(net.params.size());
  Matrix delta = logit_grad;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const Matrix& in = tape.inputs[l];
    g.grads[2 * l] = matmul_tn(in, delta);
    Matrix db(1, delta.cols());
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      auto di = delta.row(i);
      for (std::size_t j = 0; j < di.size(); ++j) db(0, j) += di[j];
    }
    g.grads[2 * l + 1] = std::move(db);
    if (l == 0) break;
    Matrix upstream = matmul_nt(delta, net.weight(l));
    // `in` is the activated output of layer l-1.
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      const double a = in.data()[i];
      upstream.data()[i] *= net.spec.activation == Activation::kTanh ? 1.0 - a * a
                                                                     : (a > 0.0 ? 1.0 : 0.0);
    }
    delta = std::move(upstream);
  }
  return g;
}

inline GradientSet backward(const Network& net, const Matrix& x, const Matrix& logit_grad) {
  return backward(net, forward_tape(net, x), logit_grad);
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  SSHT_REQUIRE(logits.all_finite(), "softmax_rows: non-finite logits");
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto out = p.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) sum += (out[j] = std::exp(in[j] - mx));
    for (double& v : out) v /= sum;
  }
  return p;
}

/// Chains a gradient at softmax outputs back to the logits:
/// dL/dz_ij = p_ij (g_ij - Σ_k g_ik p_ik).
inline Matrix softmax_backward(const Matrix& probs, const Matrix& prob_grad) {
  SSHT_REQUIRE(probs.same_shape(prob_grad), "softmax_backward shape mismatch");
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto p = probs.row(i);
    auto g = prob_grad.row(i);
    double inner = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) inner += g[k] * p[k];
    for (std::size_t j = 0; j < p.size(); ++j) out(i, j) = p[j] * (g[j] - inner);
  }
  return out;
}

struct SgdConfig {
  double learning_rate = 0.005;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 0.0005;
};

struct SgdState {
  SgdConfig config;
  std::vector<Matrix> velocity;
  /// Per-tensor update mask; empty means every tensor is trainable.
  std::vector<bool> trainable;

  static SgdState for_network(const Network& net, const SgdConfig& cfg) {
    SSHT_REQUIRE(cfg.learning_rate >= 0.0, "learning rate must be non-negative");
    SSHT_REQUIRE(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "momentum must be in [0, 1)");
    SSHT_REQUIRE(cfg.weight_decay >= 0.0, "weight decay must be non-negative");
    SgdState s{cfg, {}, {}};
    for (const auto& p : net.params) s.velocity.emplace_back(p.rows(), p.cols());
    return s;
  }
};

/// g += decay * p; v = mu * v + g; p -= lr * (nesterov ? mu * v + g : v).
inline void sgd_step(Network& net, const GradientSet& grads, SgdState& state) {
  SSHT_REQUIRE(grads.grads.size() == net.params.size() &&
                   state.velocity.size() == net.params.size(),
               "sgd_step: parameter, gradient and velocity counts differ");
  const auto& cfg = state.config;
  for (std::size_t t = 0; t < net.params.size(); ++t) {
    SSHT_REQUIRE(grads.grads[t].same_shape(net.params[t]) &&
                     state.velocity[t].same_shape(net.params[t]),
                 "sgd_step: shape mismatch for ", net.param_name(t));
    if (!grads.grads[t].all_finite())
      throw NumericalError("sgd_step: non-finite gradient for " + net.param_name(t));
  }
  for (std::size_t t = 0; t < net.params.size(); ++t) {
    if (!state.trainable.empty() && !state.trainable[t]) continue;
    auto p = net.params[t].data();
    auto g = grads.grads[t].data();
    auto v = state.velocity[t].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * p[i];
      v[i] = cfg.momentum * v[i] + gi;
      const double step = cfg.nesterov ? cfg.momentum * v[i] + gi : v[i];
      p[i] -= cfg.learning_rate * step;
    }
  }
}

/// Index of the largest entry in each row (first on ties).
inline std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

}  // namespace ssht
