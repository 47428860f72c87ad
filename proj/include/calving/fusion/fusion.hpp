#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "calving/streams/stream.hpp"

namespace calving::fusion {

using streams::StreamKind;
using streams::StreamOutput;

enum class FusionKind {
  posterior_average,
  posterior_mixer,
  hlo_concat,
  hlo_mixer,
  max_prob,
  min_prob,
  upper_limit
};

inline std::string fusion_name(FusionKind k) {
  switch (k) {
    case FusionKind::posterior_average: return "posterior-average";
    case FusionKind::posterior_mixer: return "posterior-mixer";
    case FusionKind::hlo_concat: return "hlo-concat";
    case FusionKind::hlo_mixer: return "hlo-mixer";
    case FusionKind::max_prob: return "max-prob";
    case FusionKind::min_prob: return "min-prob";
    case FusionKind::upper_limit: return "upper-limit";
  }
  throw ContractViolation("unknown fusion kind");
}

inline bool fusion_trainable(FusionKind k) {
  return k == FusionKind::posterior_mixer || k == FusionKind::hlo_concat ||
         k == FusionKind::hlo_mixer;
}

using MixtureWeights = std::array<double, 3>;  // simplex over (posture, rotation, movement)

// Stream outputs in the fixed (posture, rotation, movement) order; accepts
// any input order, rejects duplicates or missing kinds.
inline std::array<const StreamOutput*, 3> ordered_outputs(
    std::span<const StreamOutput> outputs) {
  if (outputs.size() != 3)
    throw ContractViolation("fusion expects exactly 3 stream outputs, got " +
                            std::to_string(outputs.size()));
  std::array<const StreamOutput*, 3> ordered{};
  for (const auto& o : outputs) {
    size_t slot;
    switch (o.kind) {
      case StreamKind::posture: slot = 0; break;
      case StreamKind::rotation: slot = 1; break;
      case StreamKind::movement: slot = 2; break;
      default:
        throw ContractViolation("fusion got non-fusable stream '" + stream_name(o.kind) + "'");
    }
    if (ordered[slot])
      throw ContractViolation("duplicate stream kind '" + stream_name(o.kind) + "' in fusion");
    ordered[slot] = &o;
  }
  return ordered;
}

// Gating network: dense in -> 64 -> 3 with ReLU between and softmax output.
inline nn::NetworkSpec mixer_spec(int input_dim) {
  nn::NetworkSpec spec;
  spec.input = {input_dim, 1};
  spec.layers = {nn::Dense{input_dim, 64}, nn::Relu{}, nn::Dense{64, 3}, nn::Softmax{}};
  return spec;
}

// Final identifier over concatenated HLOs: dense 96 -> 32 -> 2.
inline nn::NetworkSpec concat_head_spec() {
  return nn::dense_classifier(3 * streams::kHloDim, {32}, 2);
}

// Final identifier over the mixed HLO: dense 32 -> 16 -> 2.
inline nn::NetworkSpec mixer_head_spec() {
  return nn::dense_classifier(streams::kHloDim, {16}, 2);
}

inline MixtureWeights mixer_forward(const nn::Network& mixer,
                                    const std::vector<double>& input) {
  Tensor out = nn::forward(mixer, Tensor::vec(input));
  return {out.v[0], out.v[1], out.v[2]};
}

inline std::array<double, 2> fuse_posterior_average(std::span<const StreamOutput> outputs) {
  auto ordered = ordered_outputs(outputs);
  std::array<double, 2> fused{};
  for (const auto* o : ordered) {
    fused[0] += o->posterior[0] / 3.0;
    fused[1] += o->posterior[1] / 3.0;
  }
  return fused;
}

inline std::array<double, 2> fuse_posterior_mixer(std::span<const StreamOutput> outputs,
                                                  const MixtureWeights& w) {
  auto ordered = ordered_outputs(outputs);
  std::array<double, 2> fused{};
  for (size_t i = 0; i < 3; ++i) {
    fused[0] += w[i] * ordered[i]->posterior[0];
    fused[1] += w[i] * ordered[i]->posterior[1];
  }
  return fused;
}

inline std::vector<double> concat_hlos(std::span<const StreamOutput> outputs) {
  auto ordered = ordered_outputs(outputs);
  std::vector<double> cat;
  cat.reserve(3 * streams::kHloDim);
  for (const auto* o : ordered) {
    if (static_cast<int>(o->hlo.size()) != streams::kHloDim)
      throw ContractViolation("stream '" + stream_name(o->kind) + "' hlo is not " +
                              std::to_string(streams::kHloDim) + "-d");
    cat.insert(cat.end(), o->hlo.begin(), o->hlo.end());
  }
  return cat;
}

inline std::array<double, 2> fuse_hlo_concat(std::span<const StreamOutput> outputs,
                                             const nn::Network& head) {
  Tensor out = nn::forward(head, Tensor::vec(concat_hlos(outputs)));
  return {out.v[0], out.v[1]};
}

inline std::vector<double> mix_hlos(std::span<const StreamOutput> outputs,
                                    const MixtureWeights& w) {
  auto ordered = ordered_outputs(outputs);
  std::vector<double> mixed(streams::kHloDim, 0.0);
  for (size_t i = 0; i < 3; ++i) {
    if (static_cast<int>(ordered[i]->hlo.size()) != streams::kHloDim)
      throw ContractViolation("stream '" + stream_name(ordered[i]->kind) + "' hlo is not " +
                              std::to_string(streams::kHloDim) + "-d");
    for (int k = 0; k < streams::kHloDim; ++k)
      mixed[static_cast<size_t>(k)] += w[i] * ordered[i]->hlo[static_cast<size_t>(k)];
  }
  return mixed;
}

inline std::array<double, 2> fuse_hlo_mixer(std::span<const StreamOutput> outputs,
                                            const MixtureWeights& w, const nn::Network& head) {
  Tensor out = nn::forward(head, Tensor::vec(mix_hlos(outputs, w)));
  return {out.v[0], out.v[1]};
}

// Selection baselines: the stream with the largest (resp. smallest)
// pre-calving probability wins; ties break toward the fixed stream order.
inline std::array<double, 2> select_max_prob(std::span<const StreamOutput> outputs) {
  auto ordered = ordered_outputs(outputs);
  const StreamOutput* best = ordered[0];
  for (const auto* o : ordered)
    if (o->posterior[1] > best->posterior[1]) best = o;
  return best->posterior;
}

inline std::array<double, 2> select_min_prob(std::span<const StreamOutput> outputs) {
  auto ordered = ordered_outputs(outputs);
  const StreamOutput* best = ordered[0];
  for (const auto* o : ordered)
    if (o->posterior[1] < best->posterior[1]) best = o;
  return best->posterior;
}

// Cheating reference: with the true state known, take the most favorable
// stream (max-prob when pre-calving, min-prob when normal).
inline std::array<double, 2> upper_limit(std::span<const StreamOutput> outputs, int true_label) {
  return true_label == 1 ? select_max_prob(outputs) : select_min_prob(outputs);
}

// Frozen per-window stream outputs plus mixer inputs: the training data for
// every fusion strategy.
struct FusionDataset {
  std::vector<std::array<StreamOutput, 3>> outputs;  // (posture, rotation, movement)
  std::vector<std::vector<double>> mixer_inputs;
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
};

namespace detail {

inline std::vector<double> concat_flat(const nn::Network& a, const nn::Network& b) {
  std::vector<double> out = a.flat_params();
  std::vector<double> bp = b.flat_params();
  out.insert(out.end(), bp.begin(), bp.end());
  return out;
}

inline void append_grads(const nn::ParamSet& grads, std::vector<double>& out) {
  for (const auto& lp : grads) {
    out.insert(out.end(), lp.w.begin(), lp.w.end());
    out.insert(out.end(), lp.b.begin(), lp.b.end());
  }
}

}  // namespace detail

// Trainable model for posterior-mixer fusion: only the mixer has
// parameters; stream posteriors enter as constants.
struct PosteriorMixerModel {
  nn::Network mixer;
  const FusionDataset* data = nullptr;

  double loss_and_grad(std::span<const int> idx, std::vector<double>* grad) {
    if (idx.empty()) throw ContractViolation("loss_and_grad: empty batch");
    nn::ParamSet mixer_grads;
    if (grad) mixer_grads = nn::zero_like(mixer);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(idx.size());
    nn::ForwardTrace trace;
    for (int i : idx) {
      const auto& sample_outputs = data->outputs[static_cast<size_t>(i)];
      const Tensor min = Tensor::vec(data->mixer_inputs[static_cast<size_t>(i)]);
      const int label = data->labels[static_cast<size_t>(i)];
      Tensor wv = nn::forward(mixer, min, grad ? &trace : nullptr);
      const MixtureWeights w{wv.v[0], wv.v[1], wv.v[2]};
      auto fused = fuse_posterior_mixer(sample_outputs, w);
      loss += -std::log(std::max(fused[static_cast<size_t>(label)], kProbClamp)) * inv;
      if (grad) {
        std::array<double, 2> dfused{};
        if (fused[static_cast<size_t>(label)] > kProbClamp)
          dfused[static_cast<size_t>(label)] =
              -inv / fused[static_cast<size_t>(label)];
        Tensor dw(3, 1);
        auto ordered = ordered_outputs(sample_outputs);
        for (size_t s = 0; s < 3; ++s)
          dw.v[s] = dfused[0] * ordered[s]->posterior[0] + dfused[1] * ordered[s]->posterior[1];
        nn::backward(mixer, trace, dw, mixer_grads);
      }
    }
    if (grad) {
      grad->clear();
      detail::append_grads(mixer_grads, *grad);
    }
    return loss;
  }

  std::vector<double> get_params() const { return mixer.flat_params(); }
  void set_params(std::span<const double> p) { mixer.set_flat_params(p); }
};

// Trainable model for HLO-mixer fusion: mixer and head parameters update
// jointly; gradients flow to the mixer through the weighted HLO sum. Flat
// parameter layout is (mixer, head).
struct HloMixerModel {
  nn::Network mixer;
  nn::Network head;
  const FusionDataset* data = nullptr;

  double loss_and_grad(std::span<const int> idx, std::vector<double>* grad) {
    if (idx.empty()) throw ContractViolation("loss_and_grad: empty batch");
    nn::ParamSet mixer_grads, head_grads;
    if (grad) {
      mixer_grads = nn::zero_like(mixer);
      head_grads = nn::zero_like(head);
    }
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(idx.size());
    nn::ForwardTrace mixer_trace, head_trace;
    for (int i : idx) {
      const auto& sample_outputs = data->outputs[static_cast<size_t>(i)];
      const Tensor min = Tensor::vec(data->mixer_inputs[static_cast<size_t>(i)]);
      const int label = data->labels[static_cast<size_t>(i)];
      Tensor wv = nn::forward(mixer, min, grad ? &mixer_trace : nullptr);
      const MixtureWeights w{wv.v[0], wv.v[1], wv.v[2]};
      Tensor mixed = Tensor::vec(mix_hlos(sample_outputs, w));
      Tensor posterior = nn::forward(head, mixed, grad ? &head_trace : nullptr);
      loss += nn::cross_entropy(posterior, label) * inv;
      if (grad) {
        Tensor dmixed = nn::backward(head, head_trace,
                                     nn::cross_entropy_grad(posterior, label, inv), head_grads);
        Tensor dw(3, 1);
        auto ordered = ordered_outputs(sample_outputs);
        for (size_t s = 0; s < 3; ++s) {
          double acc = 0.0;
          for (int k = 0; k < streams::kHloDim; ++k)
            acc += dmixed.v[static_cast<size_t>(k)] * ordered[s]->hlo[static_cast<size_t>(k)];
          dw.v[s] = acc;
        }
        nn::backward(mixer, mixer_trace, dw, mixer_grads);
      }
    }
    if (grad) {
      grad->clear();
      detail::append_grads(mixer_grads, *grad);
      detail::append_grads(head_grads, *grad);
    }
    return loss;
  }

  std::vector<double> get_params() const { return detail::concat_flat(mixer, head); }

  void set_params(std::span<const double> p) {
    const size_t nm = mixer.param_count();
    if (p.size() != nm + head.param_count())
      throw ContractViolation("HloMixerModel: flat parameter size mismatch");
    mixer.set_flat_params(p.subspan(0, nm));
    head.set_flat_params(p.subspan(nm));
  }
};

// A trained fusion strategy; mixer/head present only where the strategy has
// parameters.
struct FusionModel {
  FusionKind kind = FusionKind::posterior_average;
  std::optional<nn::Network> mixer;
  std::optional<nn::Network> head;
  nn::TrainHistory history;
};

struct FusionPrediction {
  std::array<double, 2> posterior{};
  std::optional<MixtureWeights> weights;
};

// Trains whatever parameters the strategy has, with the streams frozen
// (their outputs enter the dataset as constants). Parameter-free
// strategies return an empty model.
inline FusionModel train_fusion(FusionKind kind, const FusionDataset& data,
                                std::span<const int> train_idx, std::span<const int> val_idx,
                                const nn::TrainConfig& cfg) {
  FusionModel model;
  model.kind = kind;
  if (!fusion_trainable(kind)) return model;
  if (data.mixer_inputs.empty()) throw ContractViolation("train_fusion: empty dataset");
  const int mixer_dim = static_cast<int>(data.mixer_inputs.front().size());

  // Output-scale corrected init over the training inputs, as for the
  // stream identifiers.
  std::vector<Tensor> mixer_samples;
  for (int i : train_idx.subspan(0, std::min<size_t>(train_idx.size(), 32)))
    mixer_samples.push_back(Tensor::vec(data.mixer_inputs[static_cast<size_t>(i)]));
  auto init_mixer = [&] {
    return nn::init_normalized(mixer_spec(mixer_dim), mixer_samples, mix_seed(cfg.seed, 0x333));
  };

  if (kind == FusionKind::posterior_mixer) {
    PosteriorMixerModel m{init_mixer(), &data};
    model.history = nn::train(m, train_idx, val_idx, cfg);
    model.mixer = std::move(m.mixer);
  } else if (kind == FusionKind::hlo_concat) {
    std::vector<Tensor> inputs;
    inputs.reserve(data.size());
    for (const auto& o : data.outputs) inputs.push_back(Tensor::vec(concat_hlos(o)));
    std::vector<Tensor> head_samples;
    for (int i : train_idx.subspan(0, std::min<size_t>(train_idx.size(), 32)))
      head_samples.push_back(inputs[static_cast<size_t>(i)]);
    nn::NetModel m{
        nn::init_normalized(concat_head_spec(), head_samples, mix_seed(cfg.seed, 0x444)),
        &inputs, &data.labels};
    model.history = nn::train(m, train_idx, val_idx, cfg);
    model.head = std::move(m.net);
  } else {  // hlo_mixer
    HloMixerModel m{init_mixer(),
                    nn::Network::init(mixer_head_spec(), mix_seed(cfg.seed, 0x444)), &data};
    model.history = nn::train(m, train_idx, val_idx, cfg);
    model.mixer = std::move(m.mixer);
    model.head = std::move(m.head);
  }
  return model;
}

// true_label is consumed only by the upper-limit strategy.
inline FusionPrediction fusion_predict(const FusionModel& model,
                                       std::span<const StreamOutput> outputs,
                                       const std::vector<double>& mixer_input,
                                       std::optional<int> true_label = std::nullopt) {
  FusionPrediction pred;
  switch (model.kind) {
    case FusionKind::posterior_average:
      pred.posterior = fuse_posterior_average(outputs);
      break;
    case FusionKind::posterior_mixer: {
      if (!model.mixer) throw ContractViolation("posterior-mixer model has no mixer");
      pred.weights = mixer_forward(*model.mixer, mixer_input);
      pred.posterior = fuse_posterior_mixer(outputs, *pred.weights);
      break;
    }
    case FusionKind::hlo_concat:
      if (!model.head) throw ContractViolation("hlo-concat model has no head");
      pred.posterior = fuse_hlo_concat(outputs, *model.head);
      break;
    case FusionKind::hlo_mixer: {
      if (!model.mixer || !model.head)
        throw ContractViolation("hlo-mixer model is missing mixer or head");
      pred.weights = mixer_forward(*model.mixer, mixer_input);
      pred.posterior = fuse_hlo_mixer(outputs, *pred.weights, *model.head);
      break;
    }
    case FusionKind::max_prob:
      pred.posterior = select_max_prob(outputs);
      break;
    case FusionKind::min_prob:
      pred.posterior = select_min_prob(outputs);
      break;
    case FusionKind::upper_limit:
      if (!true_label)
        throw ContractViolation("upper-limit fusion requires the true label");
      pred.posterior = upper_limit(outputs, *true_label);
      break;
  }
  return pred;
}

}  // namespace calving::fusion
