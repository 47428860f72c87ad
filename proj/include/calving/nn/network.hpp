#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "calving/common.hpp"
#include "calving/nn/spec.hpp"

namespace calving::nn {

struct LayerParams {
  std::vector<double> w;
  std::vector<double> b;
};

using ParamSet = std::vector<LayerParams>;

namespace detail {

inline std::pair<size_t, size_t> param_sizes(const Layer& ly) {
  if (const auto* d = std::get_if<Dense>(&ly))
    return {static_cast<size_t>(d->out) * d->in, static_cast<size_t>(d->out)};
  if (const auto* c = std::get_if<Conv1d>(&ly))
    return {static_cast<size_t>(c->out_channels) * c->in_channels * c->kernel,
            static_cast<size_t>(c->out_channels)};
  return {0, 0};
}

}  // namespace detail

// A network is its spec plus one parameter block per layer (empty blocks for
// the parameter-free layers). Immutable by convention outside training.
struct Network {
  NetworkSpec spec;
  ParamSet params;

  static Network zeros(NetworkSpec s) {
    s.layer_shapes();  // validate
    Network net;
    net.spec = std::move(s);
    net.params.resize(net.spec.layers.size());
    for (size_t i = 0; i < net.spec.layers.size(); ++i) {
      auto [nw, nb] = detail::param_sizes(net.spec.layers[i]);
      net.params[i].w.assign(nw, 0.0);
      net.params[i].b.assign(nb, 0.0);
    }
    return net;
  }

  // Uniform [-a, a] with a = sqrt(6 / (fan_in + fan_out)); biases zero.
  static Network init(NetworkSpec s, uint64_t seed) {
    Network net = zeros(std::move(s));
    Rng rng(seed);
    for (size_t i = 0; i < net.spec.layers.size(); ++i) {
      const Layer& ly = net.spec.layers[i];
      double fan_in = 0, fan_out = 0;
      if (const auto* d = std::get_if<Dense>(&ly)) {
        fan_in = d->in;
        fan_out = d->out;
      } else if (const auto* c = std::get_if<Conv1d>(&ly)) {
        fan_in = static_cast<double>(c->in_channels) * c->kernel;
        fan_out = static_cast<double>(c->out_channels) * c->kernel;
      } else {
        continue;
      }
      double a = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& w : net.params[i].w) w = rng.uniform(-a, a);
    }
    return net;
  }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& p : params) n += p.w.size() + p.b.size();
    return n;
  }

  std::vector<double> flat_params() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const auto& p : params) {
      out.insert(out.end(), p.w.begin(), p.w.end());
      out.insert(out.end(), p.b.begin(), p.b.end());
    }
    return out;
  }

  void set_flat_params(std::span<const double> flat) {
    if (flat.size() != param_count())
      throw ContractViolation("flat parameter size mismatch");
    size_t k = 0;
    for (auto& p : params) {
      for (double& w : p.w) w = flat[k++];
      for (double& b : p.b) b = flat[k++];
    }
  }

  uint64_t fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params) {
      h = fnv1a(std::span<const double>(p.w), h);
      h = fnv1a(std::span<const double>(p.b), h);
    }
    return h;
  }
};

inline ParamSet zero_like(const Network& net) {
  ParamSet g(net.params.size());
  for (size_t i = 0; i < net.params.size(); ++i) {
    g[i].w.assign(net.params[i].w.size(), 0.0);
    g[i].b.assign(net.params[i].b.size(), 0.0);
  }
  return g;
}

// Activations recorded during a forward pass: acts[0] is the input,
// acts[i + 1] the output of layer i.
struct ForwardTrace {
  std::vector<Tensor> acts;
};

namespace detail {

inline Tensor apply_layer(const Layer& ly, const LayerParams& p, const Tensor& x) {
  if (const auto* d = std::get_if<Dense>(&ly)) {
    Tensor y(d->out, 1);
    for (int o = 0; o < d->out; ++o) {
      double acc = p.b[o];
      const double* wrow = &p.w[static_cast<size_t>(o) * d->in];
      for (int i = 0; i < d->in; ++i) acc += wrow[i] * x.v[i];
      y.v[o] = acc;
    }
    return y;
  }
  if (const auto* c = std::get_if<Conv1d>(&ly)) {
    const int out_len = (x.length - c->kernel) / c->stride + 1;
    Tensor y(c->out_channels, out_len);
    for (int oc = 0; oc < c->out_channels; ++oc) {
      double* yrow = &y.v[static_cast<size_t>(oc) * out_len];
      for (int t = 0; t < out_len; ++t) yrow[t] = p.b[oc];
      for (int ic = 0; ic < c->in_channels; ++ic) {
        const double* xrow = &x.v[static_cast<size_t>(ic) * x.length];
        const double* wk =
            &p.w[(static_cast<size_t>(oc) * c->in_channels + ic) * c->kernel];
        for (int k = 0; k < c->kernel; ++k) {
          const double w = wk[k];
          for (int t = 0; t < out_len; ++t) yrow[t] += w * xrow[t * c->stride + k];
        }
      }
    }
    return y;
  }
  if (std::holds_alternative<GlobalAvgPool>(ly)) {
    Tensor y(x.channels, 1);
    for (int ch = 0; ch < x.channels; ++ch) {
      double acc = 0.0;
      const double* xrow = &x.v[static_cast<size_t>(ch) * x.length];
      for (int t = 0; t < x.length; ++t) acc += xrow[t];
      y.v[ch] = acc / x.length;
    }
    return y;
  }
  if (std::holds_alternative<Relu>(ly)) {
    Tensor y = x;
    for (double& v : y.v) v = std::max(v, 0.0);
    return y;
  }
  // Softmax (numerically stable)
  Tensor y = x;
  double mx = *std::max_element(y.v.begin(), y.v.end());
  double sum = 0.0;
  for (double& v : y.v) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : y.v) v /= sum;
  return y;
}

// Backward through one layer: g is dL/d(output); returns dL/d(input) and
// accumulates parameter gradients into gp.
inline Tensor backprop_layer(const Layer& ly, const LayerParams& p, const Tensor& x,
                             const Tensor& y, const Tensor& g, LayerParams& gp) {
  if (const auto* d = std::get_if<Dense>(&ly)) {
    Tensor gx(d->in, 1);
    for (int o = 0; o < d->out; ++o) {
      const double go = g.v[o];
      gp.b[o] += go;
      double* gwrow = &gp.w[static_cast<size_t>(o) * d->in];
      const double* wrow = &p.w[static_cast<size_t>(o) * d->in];
      for (int i = 0; i < d->in; ++i) {
        gwrow[i] += go * x.v[i];
        gx.v[i] += go * wrow[i];
      }
    }
    return gx;
  }
  if (const auto* c = std::get_if<Conv1d>(&ly)) {
    const int out_len = y.length;
    Tensor gx(x.channels, x.length);
    for (int oc = 0; oc < c->out_channels; ++oc) {
      const double* grow = &g.v[static_cast<size_t>(oc) * out_len];
      for (int t = 0; t < out_len; ++t) gp.b[oc] += grow[t];
      for (int ic = 0; ic < c->in_channels; ++ic) {
        const double* xrow = &x.v[static_cast<size_t>(ic) * x.length];
        double* gxrow = &gx.v[static_cast<size_t>(ic) * x.length];
        const size_t wbase = (static_cast<size_t>(oc) * c->in_channels + ic) * c->kernel;
        for (int k = 0; k < c->kernel; ++k) {
          double gw = 0.0;
          const double w = p.w[wbase + k];
          for (int t = 0; t < out_len; ++t) {
            gw += grow[t] * xrow[t * c->stride + k];
            gxrow[t * c->stride + k] += grow[t] * w;
          }
          gp.w[wbase + k] += gw;
        }
      }
    }
    return gx;
  }
  if (std::holds_alternative<GlobalAvgPool>(ly)) {
    Tensor gx(x.channels, x.length);
    for (int ch = 0; ch < x.channels; ++ch) {
      const double gv = g.v[ch] / x.length;
      double* gxrow = &gx.v[static_cast<size_t>(ch) * x.length];
      for (int t = 0; t < x.length; ++t) gxrow[t] = gv;
    }
    return gx;
  }
  if (std::holds_alternative<Relu>(ly)) {
    Tensor gx = g;
    for (size_t i = 0; i < gx.v.size(); ++i)
      if (x.v[i] <= 0.0) gx.v[i] = 0.0;
    return gx;
  }
  // Softmax Jacobian: gx_j = y_j * (g_j - sum_k g_k y_k)
  Tensor gx = g;
  double dot = 0.0;
  for (size_t i = 0; i < g.v.size(); ++i) dot += g.v[i] * y.v[i];
  for (size_t i = 0; i < g.v.size(); ++i) gx.v[i] = y.v[i] * (g.v[i] - dot);
  return gx;
}

}  // namespace detail

// Forward pass. When trace is given, every intermediate activation is kept
// (needed for backward). Rejects inputs that do not match the declared shape.
inline Tensor forward(const Network& net, const Tensor& input, ForwardTrace* trace = nullptr) {
  if (input.channels != net.spec.input.channels || input.length != net.spec.input.length)
    throw ContractViolation("input shape " + shape_str({input.channels, input.length}) +
                            " does not match network input " + shape_str(net.spec.input));
  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(net.spec.layers.size() + 1);
    trace->acts.push_back(input);
  }
  Tensor cur = input;
  for (size_t i = 0; i < net.spec.layers.size(); ++i) {
    cur = detail::apply_layer(net.spec.layers[i], net.params[i], cur);
    if (trace) trace->acts.push_back(cur);
  }
  return cur;
}

struct ForwardResult {
  Tensor output;
  Tensor hlo;
};

// Forward pass that also returns the tapped hidden-layer output.
inline ForwardResult forward_with_hlo(const Network& net, const Tensor& input) {
  if (net.spec.hlo_tap < 0) throw ContractViolation("network spec has no hlo_tap");
  ForwardTrace trace;
  Tensor out = forward(net, input, &trace);
  return {std::move(out), trace.acts[static_cast<size_t>(net.spec.hlo_tap) + 1]};
}

// Backward pass from dL/d(output); accumulates parameter gradients into
// grads and returns dL/d(input).
inline Tensor backward(const Network& net, const ForwardTrace& trace, const Tensor& grad_out,
                       ParamSet& grads) {
  Tensor g = grad_out;
  for (size_t i = net.spec.layers.size(); i-- > 0;) {
    g = detail::backprop_layer(net.spec.layers[i], net.params[i], trace.acts[i],
                               trace.acts[i + 1], g, grads[i]);
  }
  return g;
}

// Glorot init followed by a per-layer output-scale correction (LSUV-style):
// each parametric layer's weights are rescaled so its output RMS over the
// given sample inputs is ~1. Deterministic given (spec, samples, seed).
// Raw physical features can sit orders of magnitude below unit scale, which
// leaves the logits too small to train under a fixed learning rate; this
// removes that plateau without touching the training schedule.
inline Network init_normalized(NetworkSpec spec, std::span<const Tensor> samples, uint64_t seed,
                               double target_rms = 1.0, size_t max_samples = 32) {
  Network net = Network::init(std::move(spec), seed);
  const size_t n = std::min(samples.size(), max_samples);
  if (n == 0) return net;
  ForwardTrace trace;
  for (size_t li = 0; li < net.spec.layers.size(); ++li) {
    if (net.params[li].w.empty()) continue;
    double sq = 0.0;
    long cnt = 0;
    for (size_t s = 0; s < n; ++s) {
      forward(net, samples[s], &trace);
      const Tensor& act = trace.acts[li + 1];
      for (double v : act.v) {
        sq += v * v;
        ++cnt;
      }
    }
    const double rms = std::sqrt(sq / static_cast<double>(std::max<long>(cnt, 1)));
    const double scale = std::clamp(target_rms / std::max(rms, 1e-8), 0.02, 50.0);
    for (double& w : net.params[li].w) w *= scale;
  }
  return net;
}

// Cross-entropy of a posterior against an integer class label, with the
// probability clamped at kProbClamp so log(0) cannot occur.
inline double cross_entropy(const Tensor& posterior, int label) {
  if (label < 0 || label >= posterior.size())
    throw ContractViolation("class label " + std::to_string(label) + " out of range");
  return -std::log(std::max(posterior.v[static_cast<size_t>(label)], kProbClamp));
}

// dL/d(posterior) for the clamped cross-entropy above. Zero where the clamp
// is active (the loss is locally constant there).
inline Tensor cross_entropy_grad(const Tensor& posterior, int label, double scale = 1.0) {
  Tensor g(posterior.channels, posterior.length);
  double p = posterior.v[static_cast<size_t>(label)];
  if (p > kProbClamp) g.v[static_cast<size_t>(label)] = -scale / p;
  return g;
}

// Mean cross-entropy over a batch plus gradients for every parameter.
inline std::pair<double, ParamSet> loss_and_gradients(
    const Network& net, const std::vector<std::pair<Tensor, int>>& batch) {
  if (batch.empty()) throw ContractViolation("loss_and_gradients: empty batch");
  ParamSet grads = zero_like(net);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  ForwardTrace trace;
  for (const auto& [input, label] : batch) {
    Tensor posterior = forward(net, input, &trace);
    loss += cross_entropy(posterior, label) * inv;
    backward(net, trace, cross_entropy_grad(posterior, label, inv), grads);
  }
  return {loss, grads};
}

// params' = params - lr * grad, elementwise. Non-finite gradients are a
// training failure and are reported by the caller (train loop).
inline void sgd_step(Network& net, const ParamSet& grads, double lr) {
  if (grads.size() != net.params.size())
    throw ContractViolation("gradient/parameter layer count mismatch");
  for (size_t i = 0; i < net.params.size(); ++i) {
    if (grads[i].w.size() != net.params[i].w.size() ||
        grads[i].b.size() != net.params[i].b.size())
      throw ContractViolation("gradient shape mismatch at layer " + std::to_string(i));
    for (size_t k = 0; k < net.params[i].w.size(); ++k)
      net.params[i].w[k] -= lr * grads[i].w[k];
    for (size_t k = 0; k < net.params[i].b.size(); ++k)
      net.params[i].b[k] -= lr * grads[i].b[k];
  }
}

}  // namespace calving::nn
