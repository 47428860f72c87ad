#include "doctest.h"

#include "calving/features/extract.hpp"
#include "calving/synth/simulate.hpp"
#include "helpers.hpp"

using namespace calving;
using namespace calving::features;

namespace {

std::vector<FrameFeature> blank_window() {
  std::vector<FrameFeature> frames(kWindowFrames);
  for (int t = 0; t < kWindowFrames; ++t) {
    auto& f = frames[static_cast<size_t>(t)];
    f.t = t;
    f.valid = true;
    f.posture_posterior = {0.25, 0.25, 0.25, 0.25};
    f.neck_heatmap.fill(1.0 / 9.0);
    f.tail_heatmap.fill(1.0 / 9.0);
    f.bbox = {0.4, 0.4, 0.2, 0.2};
  }
  return frames;
}

}  // namespace

TEST_CASE("interpolation identities and anchored fills") {
  std::vector<std::vector<double>> v{{2.0}, {0.0}, {4.0}};
  std::vector<bool> ok{true, false, true};
  CHECK(interpolate_mean(v, ok)[1][0] == doctest::Approx(3.0).epsilon(1e-15));

  const std::vector<bool> all_ok{true, true, true};
  CHECK(interpolate_mean(v, all_ok) == v);
  CHECK(interpolate_linear(v, all_ok) == v);

  std::vector<std::vector<double>> lin{{0.0}, {7.0}, {7.0}, {7.0}, {4.0}};
  std::vector<bool> mask{true, false, false, false, true};
  auto filled = interpolate_linear(lin, mask);
  CHECK(filled[1][0] == doctest::Approx(1.0));
  CHECK(filled[2][0] == doctest::Approx(2.0));
  CHECK(filled[3][0] == doctest::Approx(3.0));

  // A run of masked frames under the mean rule all take the anchor mean.
  auto mean_run = interpolate_mean(lin, mask);
  for (int t = 1; t <= 3; ++t) CHECK(mean_run[static_cast<size_t>(t)][0] == doctest::Approx(2.0));

  CHECK_THROWS_AS(interpolate_mean(v, std::vector<bool>{false, false, false}),
                  ContractViolation);
}

TEST_CASE("interpolation matches the independent reference on random masked sequences") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 12 + rng.pick(20);
    const int dim = 1 + rng.pick(4);
    std::vector<std::vector<double>> v(static_cast<size_t>(n));
    std::vector<bool> ok(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
      v[static_cast<size_t>(t)].resize(static_cast<size_t>(dim));
      for (double& x : v[static_cast<size_t>(t)]) x = rng.gauss();
      ok[static_cast<size_t>(t)] = rng.bernoulli(0.6);
    }
    ok[0] = ok[static_cast<size_t>(n - 1)] = true;  // anchors
    auto mean_ref = oracle::interpolate_mean(v, ok);
    auto lin_ref = oracle::interpolate_linear(v, ok);
    CHECK(interpolate_mean(v, ok) == mean_ref);
    auto lin_got = interpolate_linear(v, ok);
    REQUIRE(lin_got.size() == lin_ref.size());
    for (size_t t = 0; t < lin_got.size(); ++t)
      for (size_t k = 0; k < lin_got[t].size(); ++k)
        CHECK(lin_got[t][k] == doctest::Approx(lin_ref[t][k]).epsilon(1e-14));
  }
}

TEST_CASE("symmetric KL frozen value, symmetry, and contracts") {
  const std::vector<double> p{0.8, 0.2}, q{0.2, 0.8};
  CHECK(symmetric_kl(p, q) == doctest::Approx(1.2 * std::log(4.0)).epsilon(1e-13));
  CHECK(symmetric_kl(p, p) == 0.0);

  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    auto a = oracle::random_simplex(rng, 9);
    auto b = oracle::random_simplex(rng, 9);
    const double ab = symmetric_kl(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab - symmetric_kl(b, a) == 0.0);  // exact symmetry
    CHECK(ab == doctest::Approx(oracle::sym_kl(a, b)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(symmetric_kl(p, std::vector<double>{1.0, 0.0, 0.0}), ContractViolation);
  CHECK_THROWS_AS(symmetric_kl(std::vector<double>{0.9, 0.9}, p), ContractViolation);
}

TEST_CASE("m-measure: constants, alternation, and the brute-force oracle") {
  std::vector<std::vector<double>> constant(60, {0.1, 0.6, 0.3});
  for (double m : m_measure(constant, 16)) CHECK(m == 0.0);

  const std::vector<double> p{0.7, 0.3}, q{0.3, 0.7};
  std::vector<std::vector<double>> alternating;
  for (int t = 0; t < 60; ++t) alternating.push_back(t % 2 == 0 ? p : q);
  const double d = symmetric_kl(p, q);
  auto m = m_measure(alternating, 16);
  auto ref = oracle::m_measure(alternating, 16);
  for (int dt = 1; dt <= 16; ++dt) {
    const double want = (dt % 2 == 1) ? d : 0.0;
    CHECK(std::abs(m[static_cast<size_t>(dt - 1)] - want) <= 1e-12);
    CHECK(m[static_cast<size_t>(dt - 1)] ==
          doctest::Approx(ref[static_cast<size_t>(dt - 1)]).epsilon(1e-12));
  }

  // Random sequences against the oracle.
  Rng rng(99);
  std::vector<std::vector<double>> seq;
  for (int t = 0; t < 50; ++t) seq.push_back(oracle::random_simplex(rng, 9));
  auto got = m_measure(seq, 12);
  auto want = oracle::m_measure(seq, 12);
  for (size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));

  CHECK_THROWS_AS(m_measure(std::vector<std::vector<double>>(10, {0.5, 0.5}), 10),
                  ContractViolation);
}

TEST_CASE("posture feature pools max and average over the window") {
  auto frames = blank_window();
  Rng rng(3);
  for (auto& f : frames)
    for (double& h : f.posture_hidden) h = rng.gauss();

  auto feat = posture_feature(frames);
  REQUIRE(feat.size() == 512);
  for (int k = 0; k < 256; ++k)
    CHECK(feat[static_cast<size_t>(k)] >= feat[static_cast<size_t>(k + 256)]);  // max >= avg

  // Constant hidden vector: both halves equal it.
  for (auto& f : frames)
    for (int k = 0; k < kHiddenDim; ++k) f.posture_hidden[static_cast<size_t>(k)] = 0.5 * k;
  feat = posture_feature(frames);
  for (int k = 0; k < 256; ++k) {
    CHECK(feat[static_cast<size_t>(k)] == doctest::Approx(0.5 * k));
    CHECK(feat[static_cast<size_t>(k + 256)] == doctest::Approx(0.5 * k));
  }

  // One-hot spike at a single frame.
  for (auto& f : frames) f.posture_hidden.fill(0.0);
  frames[17].posture_hidden[5] = 2.0;
  feat = posture_feature(frames);
  CHECK(feat[5] == doctest::Approx(2.0));
  CHECK(feat[256 + 5] == doctest::Approx(2.0 / 180.0));

  // Permutation invariance (max half exactly; avg half up to summation
  // rounding).
  Rng rng2(5);
  for (auto& f : frames)
    for (double& h : f.posture_hidden) h = rng2.gauss();
  auto before = posture_feature(frames);
  Rng rng3(8);
  rng3.shuffle(frames);
  auto after = posture_feature(frames);
  for (int k = 0; k < 256; ++k) CHECK(after[static_cast<size_t>(k)] == before[static_cast<size_t>(k)]);
  for (int k = 256; k < 512; ++k)
    CHECK(after[static_cast<size_t>(k)] ==
          doctest::Approx(before[static_cast<size_t>(k)]).epsilon(1e-12));

  frames.pop_back();
  CHECK_THROWS_AS(posture_feature(frames), ContractViolation);
}

TEST_CASE("rotation feature: static cow gives zeros, neck-only motion fills one half") {
  auto frames = blank_window();
  for (auto& f : frames) {
    f.neck_heatmap.fill(0.0);
    f.neck_heatmap[1] = 1.0;
    f.tail_heatmap.fill(0.0);
    f.tail_heatmap[7] = 1.0;
  }
  auto feat = rotation_feature(frames);
  REQUIRE(feat.size() == 64);
  for (double v : feat) CHECK(v == 0.0);

  // Neck alternates, tail static: first half positive, second half zero at odd lags.
  for (int t = 0; t < kWindowFrames; ++t) {
    auto& f = frames[static_cast<size_t>(t)];
    f.neck_heatmap.fill(0.0);
    f.neck_heatmap[t % 2 == 0 ? 1 : 5] = 1.0;
  }
  feat = rotation_feature(frames);
  double neck_sum = 0.0, tail_sum = 0.0;
  for (int k = 0; k < 32; ++k) {
    neck_sum += feat[static_cast<size_t>(k)];
    tail_sum += feat[static_cast<size_t>(k + 32)];
  }
  CHECK(neck_sum > 0.0);
  CHECK(tail_sum == 0.0);
  for (double v : feat) CHECK(v >= 0.0);
}

TEST_CASE("movement feature: stationary, drift, and the telescoping identity") {
  auto frames = blank_window();
  Tensor still = movement_feature(frames);
  REQUIRE(still.channels == 2);
  REQUIRE(still.length == kWindowFrames);
  for (double v : still.v) CHECK(v == 0.0);

  // Uniform +0.01/frame drift in x.
  for (int t = 0; t < kWindowFrames; ++t)
    frames[static_cast<size_t>(t)].bbox = {0.1 + 0.01 * t, 0.4, 0.2, 0.2};
  Tensor drift = movement_feature(frames);
  CHECK(drift.at(0, 0) == 0.0);
  CHECK(drift.at(1, 0) == 0.0);
  for (int t = 1; t < kWindowFrames; ++t) {
    CHECK(drift.at(0, t) == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(drift.at(1, t) == doctest::Approx(0.0));
  }

  // Telescoping: the deltas sum to (last center - first center).
  Rng rng(12);
  for (auto& f : frames)
    f.bbox = {rng.uniform(0.0, 0.8), rng.uniform(0.0, 0.8), 0.15, 0.1};
  Tensor rnd = movement_feature(frames);
  double sx = 0.0, sy = 0.0;
  for (int t = 0; t < kWindowFrames; ++t) {
    sx += rnd.at(0, t);
    sy += rnd.at(1, t);
  }
  const auto& first = frames.front().bbox;
  const auto& last = frames.back().bbox;
  CHECK(sx == doctest::Approx((last[0] + last[2] / 2) - (first[0] + first[2] / 2)).epsilon(1e-9));
  CHECK(sy == doctest::Approx((last[1] + last[3] / 2) - (first[1] + first[3] / 2)).epsilon(1e-9));

  for (double v : rnd.v) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("movement summary and mixer input dimensions") {
  auto frames = blank_window();
  Tensor deltas = movement_feature(frames);
  auto summary = movement_summary(deltas);
  REQUIRE(summary.size() == 4);
  for (double v : summary) CHECK(v == 0.0);

  std::vector<double> posture(512, 0.1), rotation(64, 0.2);
  auto mixer = mixer_input(posture, rotation, deltas);
  CHECK(mixer.size() == 580);
  auto raw = mixer_input_raw(posture, rotation, deltas);
  CHECK(raw.size() == 360 + 64 + 512);
}

TEST_CASE("feature extraction is invariant to dropped frames being zeroed") {
  // Interpolation must consume only valid frames: identical windows that
  // differ in the payload of their dropped frames give identical features.
  auto sim = synth::simulate_cow(synth::default_profile(), 1, kWindowFrames, 505);
  auto dropped = synth::apply_frame_dropping(sim.frames, 0.3, 17);
  auto scrambled = dropped;
  Rng rng(1);
  for (auto& f : scrambled)
    if (!f.valid) {
      for (double& h : f.posture_hidden) h = rng.gauss(0, 100.0);
      for (double& h : f.neck_heatmap) h = rng.uniform();
      f.bbox = {rng.uniform(), rng.uniform(), 0.5, 0.5};
    }
  CHECK(posture_feature(dropped) == posture_feature(scrambled));
  CHECK(rotation_feature(dropped) == rotation_feature(scrambled));
  CHECK(movement_feature(dropped).v == movement_feature(scrambled).v);
}
