#include "doctest.h"

#include "calving/eval/metrics.hpp"
#include "calving/streams/stream.hpp"
#include "calving/synth/corpus.hpp"

using namespace calving;
using namespace calving::streams;

TEST_CASE("stream architectures have the documented shapes") {
  auto posture = build_stream(StreamKind::posture);
  CHECK(posture.input == nn::Shape{512, 1});
  CHECK(posture.output_shape() == nn::Shape{2, 1});
  CHECK(posture.tap_shape().size() == 32);

  auto rotation = build_stream(StreamKind::rotation);
  CHECK(rotation.input == nn::Shape{64, 1});
  CHECK(rotation.tap_shape().size() == 32);

  auto movement = build_stream(StreamKind::movement);
  CHECK(movement.input == nn::Shape{2, kWindowFrames});
  CHECK(movement.output_shape() == nn::Shape{2, 1});
  CHECK(movement.tap_shape().size() == 32);

  auto e2e = build_stream(StreamKind::e2e);
  CHECK(e2e.input == nn::Shape{512, 1});
  CHECK(e2e.tap_shape().size() == 32);
}

TEST_CASE("zero-initialized stream nets emit the uniform posterior and predictions repeat") {
  for (StreamKind kind : {StreamKind::posture, StreamKind::rotation, StreamKind::movement}) {
    nn::Network net = nn::Network::zeros(build_stream(kind));
    const nn::Shape in = net.spec.input;
    Tensor x(in.channels, in.length);
    Rng rng(3);
    for (double& v : x.v) v = rng.gauss();
    StreamOutput out = stream_predict(net, x, kind);
    CHECK(out.posterior[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.hlo.size() == 32);
    StreamOutput again = stream_predict(net, x, kind);
    CHECK(out.posterior == again.posterior);
    CHECK(out.hlo == again.hlo);
  }
}

TEST_CASE("stream prediction rejects mismatched features") {
  nn::Network net = nn::Network::zeros(build_stream(StreamKind::posture));
  CHECK_THROWS_AS(stream_predict(net, Tensor::vec(std::vector<double>(64, 0.0)),
                                 StreamKind::posture),
                  ContractViolation);
}

TEST_CASE("e2e feature: constant windows, fixed projection, drop repair") {
  std::vector<FrameFeature> frames(kWindowFrames);
  for (int t = 0; t < kWindowFrames; ++t) {
    auto& f = frames[static_cast<size_t>(t)];
    f.t = t;
    f.valid = true;
    f.posture_posterior = {0.7, 0.1, 0.1, 0.1};
    f.neck_heatmap.fill(1.0 / 9.0);
    f.tail_heatmap.fill(1.0 / 9.0);
    f.bbox = {0.3, 0.3, 0.2, 0.2};
  }
  auto feat = e2e_feature(frames);
  REQUIRE(feat.size() == 512);
  // Constant window: the max half equals the avg half.
  for (int k = 0; k < 256; ++k)
    CHECK(feat[static_cast<size_t>(k)] ==
          doctest::Approx(feat[static_cast<size_t>(k + 256)]).epsilon(1e-12));

  // The projection is a process constant: same window, same feature, always.
  CHECK(e2e_feature(frames) == feat);

  // Dropped frames are repaired before pooling; their payloads are ignored.
  auto with_drops = frames;
  for (int t = 10; t < 20; ++t) {
    with_drops[static_cast<size_t>(t)].valid = false;
    with_drops[static_cast<size_t>(t)].posture_posterior = {1e6, 0, 0, 0};
  }
  CHECK(e2e_feature(with_drops) == feat);
}

TEST_CASE("extract_features wires each stream to its designated interpolation") {
  auto sim = synth::simulate_cow(synth::default_profile(), 1, kWindowFrames, 99);
  WindowSample w;
  w.frames = synth::apply_frame_dropping(sim.frames, 0.2, 5);
  auto f = extract_features(w);
  CHECK(f.posture.size() == 512);
  CHECK(f.rotation.size() == 64);
  CHECK(f.movement.channels == 2);
  CHECK(f.movement.length == kWindowFrames);
  CHECK(f.e2e.size() == 512);
  CHECK(f.mixer.size() == 580);

  CHECK(f.posture == features::posture_feature(w.frames));
  CHECK(f.rotation == features::rotation_feature(w.frames));
  CHECK(f.e2e == e2e_feature(w.frames));
  CHECK(f.mixer == features::mixer_input(f.posture, f.rotation, f.movement));

  auto raw = extract_features(w, true);
  CHECK(raw.mixer.size() == 936);
}

TEST_CASE("a trained posture stream beats chance on a held-out cow") {
  synth::CorpusConfig cfg;
  cfg.n_cows = 6;
  cfg.windows_per_segment = 3;
  synth::Corpus corpus = synth::generate_corpus(cfg, 77);

  std::vector<Tensor> inputs;
  std::vector<int> labels;
  std::vector<int> train_idx, val_idx, test_idx;
  for (size_t i = 0; i < corpus.windows.size(); ++i) {
    const auto& w = corpus.windows[i];
    inputs.push_back(Tensor::vec(features::posture_feature(w.frames)));
    labels.push_back(w.label);
    if (w.cow_id <= 3)
      train_idx.push_back(static_cast<int>(i));
    else if (w.cow_id == 4)
      val_idx.push_back(static_cast<int>(i));
    else
      test_idx.push_back(static_cast<int>(i));
  }
  nn::TrainConfig tc;
  tc.seed = 11;
  tc.max_epochs = 20;
  auto trained = train_stream(StreamKind::posture, inputs, labels, train_idx, val_idx, tc);

  // Training moved the loss below the uniform-start ln 2.
  CHECK(trained.history.best_val_loss < std::log(2.0));

  std::vector<double> scores;
  std::vector<int> test_labels;
  for (int i : test_idx) {
    scores.push_back(
        stream_predict(trained.net, inputs[static_cast<size_t>(i)], StreamKind::posture)
            .posterior[1]);
    test_labels.push_back(labels[static_cast<size_t>(i)]);
  }
  CHECK(eval::roc_auc(scores, test_labels).auc > 0.5);

  // Deterministic per seed.
  auto again = train_stream(StreamKind::posture, inputs, labels, train_idx, val_idx, tc);
  CHECK(again.net.flat_params() == trained.net.flat_params());
}
