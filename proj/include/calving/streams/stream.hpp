#pragma once

#include <array>
#include <string>
#include <vector>

#include "calving/features/extract.hpp"
#include "calving/nn/train.hpp"

namespace calving::streams {

enum class StreamKind { posture, rotation, movement, e2e };

inline constexpr std::array<StreamKind, 3> kFusedStreams = {
    StreamKind::posture, StreamKind::rotation, StreamKind::movement};

inline std::string stream_name(StreamKind k) {
  switch (k) {
    case StreamKind::posture: return "posture";
    case StreamKind::rotation: return "rotation";
    case StreamKind::movement: return "movement";
    case StreamKind::e2e: return "e2e";
  }
  throw ContractViolation("unknown stream kind");
}

// Per-window, per-stream result: pre-calving/normal posterior (index 1 =
// pre-calving) and the 32-d hidden-layer output used for fusion.
struct StreamOutput {
  StreamKind kind = StreamKind::posture;
  std::array<double, 2> posterior{};
  std::vector<double> hlo;
};

inline constexpr int kHloDim = 32;
inline constexpr int kPostureFeatureDim = 2 * kHiddenDim;  // 512
inline constexpr int kRotationFeatureDim = 2 * features::kMMeasureLags;  // 64

// Identifier architectures. The dense streams are in -> 64 -> 32 -> 2 with
// ReLU and a softmax head; the movement identifier is two 1D convolutions,
// GAP, then 32 -> 32 -> 2. The hlo tap sits on the 32-wide activation just
// before the output layer.
inline nn::NetworkSpec build_stream(StreamKind kind) {
  using namespace nn;
  switch (kind) {
    case StreamKind::posture:
      return dense_classifier(kPostureFeatureDim, {64, kHloDim}, 2, kHloDim);
    case StreamKind::rotation:
      return dense_classifier(kRotationFeatureDim, {64, kHloDim}, 2, kHloDim);
    case StreamKind::e2e:
      // Same identifier as the posture stream, applied to pooled generic
      // frame features.
      return dense_classifier(kPostureFeatureDim, {64, kHloDim}, 2, kHloDim);
    case StreamKind::movement: {
      NetworkSpec spec;
      spec.input = {2, kWindowFrames};
      spec.layers = {Conv1d{2, 16, 5, 1}, Relu{}, Conv1d{16, 32, 5, 1}, Relu{},
                     GlobalAvgPool{}, Dense{32, kHloDim}, Relu{}, Dense{kHloDim, 2},
                     Softmax{}};
      spec.hlo_tap = 6;  // the ReLU after the 32-wide dense layer
      return spec;
    }
  }
  throw ContractViolation("unknown stream kind");
}

inline StreamOutput stream_predict(const nn::Network& net, const Tensor& feature,
                                   StreamKind kind) {
  auto [output, hlo] = nn::forward_with_hlo(net, feature);
  StreamOutput out;
  out.kind = kind;
  out.posterior = {output.v[0], output.v[1]};
  out.hlo = std::move(hlo.v);
  return out;
}

// The generic-feature baseline: raw frame channels (posture posterior,
// both heatmaps, bbox; 26 values) pass through a fixed random projection to
// 256-d and are max+avg pooled. The projection is seeded by a constant, so
// it is identical across train and test and across corpora; it can carry
// class signal but has no task-aligned structure.
inline constexpr uint64_t kE2eProjectionSeed = 0xe2ef00dULL;
inline constexpr int kE2eRawDim =
    kPostureClasses + 2 * kHeatmapCells + 4;  // 26
inline constexpr int kE2eProjectedDim = kHiddenDim;  // 256

inline const std::vector<double>& e2e_projection() {
  static const std::vector<double> w = [] {
    std::vector<double> m(static_cast<size_t>(kE2eProjectedDim) * kE2eRawDim);
    Rng rng(kE2eProjectionSeed);
    const double a = std::sqrt(6.0 / (kE2eRawDim + kE2eProjectedDim));
    for (double& x : m) x = rng.uniform(-a, a);
    return m;
  }();
  return w;
}

inline std::vector<double> e2e_feature(const std::vector<FrameFeature>& frames) {
  features::detail::require_window(frames);
  auto raw = features::detail::channel(frames, [](const FrameFeature& f) {
    std::vector<double> c;
    c.reserve(kE2eRawDim);
    c.insert(c.end(), f.posture_posterior.begin(), f.posture_posterior.end());
    c.insert(c.end(), f.neck_heatmap.begin(), f.neck_heatmap.end());
    c.insert(c.end(), f.tail_heatmap.begin(), f.tail_heatmap.end());
    c.insert(c.end(), f.bbox.begin(), f.bbox.end());
    return c;
  });
  raw = features::interpolate_mean(raw, features::detail::validity(frames));
  const auto& w = e2e_projection();
  std::vector<std::vector<double>> projected(raw.size());
  for (size_t t = 0; t < raw.size(); ++t) {
    projected[t].resize(kE2eProjectedDim);
    for (int o = 0; o < kE2eProjectedDim; ++o) {
      double acc = 0.0;
      const double* wrow = &w[static_cast<size_t>(o) * kE2eRawDim];
      for (int i = 0; i < kE2eRawDim; ++i) acc += wrow[i] * raw[t][static_cast<size_t>(i)];
      projected[t][static_cast<size_t>(o)] = acc;
    }
  }
  return features::max_avg_pool(projected);
}

// Everything the pipeline needs per window, extracted once. The
// stream/interpolation pairing is fixed here: posture and e2e use
// mean-value repair, rotation and movement linear repair.
struct WindowFeatureSet {
  std::vector<double> posture;     // 512
  std::vector<double> rotation;    // 64
  Tensor movement;                 // 2 x 180
  std::vector<double> e2e;         // 512
  std::vector<double> mixer;       // 580 (or 936 in raw mode)
};

inline WindowFeatureSet extract_features(const WindowSample& window,
                                         bool raw_mixer_coordinates = false) {
  WindowFeatureSet f;
  f.posture = features::posture_feature(window.frames);
  f.rotation = features::rotation_feature(window.frames);
  f.movement = features::movement_feature(window.frames);
  f.e2e = e2e_feature(window.frames);
  f.mixer = raw_mixer_coordinates
                ? features::mixer_input_raw(f.posture, f.rotation, f.movement)
                : features::mixer_input(f.posture, f.rotation, f.movement);
  return f;
}

inline Tensor stream_input(const WindowFeatureSet& f, StreamKind kind) {
  switch (kind) {
    case StreamKind::posture: return Tensor::vec(f.posture);
    case StreamKind::rotation: return Tensor::vec(f.rotation);
    case StreamKind::movement: return f.movement;
    case StreamKind::e2e: return Tensor::vec(f.e2e);
  }
  throw ContractViolation("unknown stream kind");
}

struct TrainedStream {
  nn::Network net;
  nn::TrainHistory history;
};

// Trains one stream identifier on pre-extracted features. Initialization is
// output-scale corrected against (a deterministic subset of) the training
// inputs; the schedule and early stopping live in nn::train. Deterministic
// given cfg.seed.
inline TrainedStream train_stream(StreamKind kind, const std::vector<Tensor>& inputs,
                                  const std::vector<int>& labels,
                                  std::span<const int> train_idx,
                                  std::span<const int> val_idx, const nn::TrainConfig& cfg) {
  std::vector<Tensor> init_samples;
  init_samples.reserve(std::min<size_t>(train_idx.size(), 32));
  for (int i : train_idx.subspan(0, std::min<size_t>(train_idx.size(), 32)))
    init_samples.push_back(inputs[static_cast<size_t>(i)]);
  nn::NetModel model{
      nn::init_normalized(build_stream(kind), init_samples, mix_seed(cfg.seed, 0x5eed)),
      &inputs, &labels};
  nn::TrainHistory history = nn::train(model, train_idx, val_idx, cfg);
  return {std::move(model.net), std::move(history)};
}

}  // namespace calving::streams
