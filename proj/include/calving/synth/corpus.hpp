#pragma once

#include <vector>

#include "calving/synth/simulate.hpp"

namespace calving::synth {

struct InterferenceConfig {
  bool enabled = false;
  double window_fraction = 1.0 / 3.0;  // share of each cow's normal windows corrupted
  double frame_prob = 0.3;             // per-frame capture probability inside those windows
};

struct CorpusConfig {
  int n_cows = 15;
  int windows_per_segment = 6;
  double drop_rate = 0.15;
  // Per-cow multiplicative spread, drawn independently per sign: cows
  // express the signs with different strengths, so the streams fail on
  // different cows and fusion has complementary errors to exploit.
  double cow_jitter = 0.4;
  BehaviorProfile profile = default_profile();
  InterferenceConfig interference;

  int frames_per_segment() const { return windows_per_segment * kWindowFrames; }

  void validate() const {
    if (n_cows < 2) throw ContractViolation("corpus config: need at least 2 cows");
    if (windows_per_segment < 1)
      throw ContractViolation("corpus config: windows_per_segment must be >= 1");
    if (drop_rate < 0 || drop_rate >= 1)
      throw ContractViolation("corpus config: drop_rate must be in [0, 1)");
    if (cow_jitter < 0 || cow_jitter >= 0.5)
      throw ContractViolation("corpus config: cow_jitter must be in [0, 0.5)");
    if (interference.window_fraction < 0 || interference.window_fraction > 1)
      throw ContractViolation("corpus config: interference window_fraction must be in [0, 1]");
    if (interference.frame_prob < 0 || interference.frame_prob >= 1)
      throw ContractViolation("corpus config: interference frame_prob must be in [0, 1)");
    profile.validate();
  }
};

struct Corpus {
  std::vector<WindowSample> windows;
  int n_cows = 0;
  uint64_t master_seed = 0;

  std::vector<const WindowSample*> windows_of_cow(int cow) const {
    std::vector<const WindowSample*> out;
    for (const auto& w : windows)
      if (w.cow_id == cow) out.push_back(&w);
    return out;
  }
};

namespace detail {

// One multiplier per cow applied to both states' sign rates, so the
// pre-calving > normal ordering survives the jitter.
inline BehaviorProfile jitter_profile(const BehaviorProfile& base, double jitter, Rng& rng) {
  BehaviorProfile p = base;
  const double m_switch = rng.uniform(1.0 - jitter, 1.0 + jitter);
  const double m_tail = rng.uniform(1.0 - jitter, 1.0 + jitter);
  const double m_rot = rng.uniform(1.0 - jitter, 1.0 + jitter);
  const double m_walk = rng.uniform(1.0 - jitter, 1.0 + jitter);
  for (StateRates* r : {&p.normal, &p.pre_calving}) {
    r->posture_switch_per_hour *= m_switch;
    r->tail_raise_prob = std::min(r->tail_raise_prob * m_tail, 0.95);
    r->rotation_per_hour *= m_rot;
    r->walk_fraction = std::min(r->walk_fraction * m_walk, 0.95);
  }
  return p;
}

}  // namespace detail

// Builds the labeled corpus: n_cows virtual cows, one normal and one
// pre-calving segment each, sliced into non-overlapping windows with frame
// dropping applied per window. Per-cow seeds derive from the master seed.
inline Corpus generate_corpus(const CorpusConfig& cfg, uint64_t master_seed) {
  cfg.validate();
  Corpus corpus;
  corpus.n_cows = cfg.n_cows;
  corpus.master_seed = master_seed;
  int window_id = 0;
  for (int cow = 0; cow < cfg.n_cows; ++cow) {
    Rng cow_rng(mix_seed(master_seed, static_cast<uint64_t>(cow), 0x11));
    const BehaviorProfile cow_profile =
        detail::jitter_profile(cfg.profile, cfg.cow_jitter, cow_rng);

    for (int label : {0, 1}) {
      BehaviorProfile segment_profile = cow_profile;
      std::vector<bool> interference_windows(static_cast<size_t>(cfg.windows_per_segment), false);
      std::vector<bool> frame_mask;
      if (label == 0 && cfg.interference.enabled) {
        segment_profile.neighbor_interference_prob = cfg.interference.frame_prob;
        const int n_corrupt = static_cast<int>(
            std::lround(cfg.interference.window_fraction * cfg.windows_per_segment));
        std::vector<int> order(static_cast<size_t>(cfg.windows_per_segment));
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        Rng pick_rng(mix_seed(master_seed, static_cast<uint64_t>(cow), 0x22));
        pick_rng.shuffle(order);
        for (int i = 0; i < n_corrupt; ++i)
          interference_windows[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
        frame_mask.resize(static_cast<size_t>(cfg.frames_per_segment()));
        for (int w = 0; w < cfg.windows_per_segment; ++w)
          for (int t = 0; t < kWindowFrames; ++t)
            frame_mask[static_cast<size_t>(w * kWindowFrames + t)] =
                interference_windows[static_cast<size_t>(w)];
      }

      SimResult sim = simulate_cow(
          segment_profile, label, cfg.frames_per_segment(),
          mix_seed(master_seed, static_cast<uint64_t>(cow), static_cast<uint64_t>(label)),
          frame_mask);

      for (int w = 0; w < cfg.windows_per_segment; ++w) {
        WindowSample sample;
        sample.window_id = window_id++;
        sample.cow_id = cow;
        sample.label = label;
        sample.interference = interference_windows[static_cast<size_t>(w)];
        sample.frames.assign(sim.frames.begin() + w * kWindowFrames,
                             sim.frames.begin() + (w + 1) * kWindowFrames);
        sample.frames = apply_frame_dropping(
            std::move(sample.frames), cfg.drop_rate,
            mix_seed(master_seed, static_cast<uint64_t>(cow),
                     static_cast<uint64_t>(label * 100 + w + 0x40)));
        corpus.windows.push_back(std::move(sample));
      }
    }
  }
  return corpus;
}

// Returns a copy with window labels permuted (seeded); the negative-control
// corpus for leakage and sanity checks.
inline Corpus shuffle_labels(const Corpus& corpus, uint64_t seed) {
  Corpus out = corpus;
  std::vector<int> labels;
  labels.reserve(out.windows.size());
  for (const auto& w : out.windows) labels.push_back(w.label);
  Rng rng(seed);
  rng.shuffle(labels);
  for (size_t i = 0; i < out.windows.size(); ++i) out.windows[i].label = labels[i];
  return out;
}

}  // namespace calving::synth
