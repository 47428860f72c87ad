#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "calving/frame.hpp"
#include "calving/synth/behavior.hpp"

namespace calving::synth {

// Class prototypes stand in for a pretrained frame-wise CNN, so they are
// fixed by a constant seed and shared by every cow and every corpus.
inline constexpr uint64_t kPrototypeSeed = 0x706f7374757265ULL;

inline const std::array<std::array<double, kHiddenDim>, kPostureClasses>& class_prototypes() {
  static const auto prototypes = [] {
    std::array<std::array<double, kHiddenDim>, kPostureClasses> p{};
    Rng rng(kPrototypeSeed);
    for (auto& cls : p)
      for (double& v : cls) v = rng.gauss();
    return p;
  }();
  return prototypes;
}

// 8 compass directions, counterclockwise from +x. The neck occupies the
// boundary cell of the 3x3 grid the cow faces; the tail the opposite cell.
inline constexpr std::array<int, 8> kDirectionCell = {5, 2, 1, 0, 3, 6, 7, 8};

inline int direction_cell(int dir) { return kDirectionCell[static_cast<size_t>(dir & 7)]; }
inline int opposite_direction(int dir) { return (dir + 4) & 7; }

enum class Posture { standing, lying };
enum class Motion { idle, walking };

// Hidden-state trace kept alongside the frames; tests use it to calibrate
// realized event rates against the profile.
struct SimTrace {
  std::vector<Posture> posture;
  std::vector<bool> tail_up;
  std::vector<Motion> motion;
  std::vector<int> direction;       // 0..7
  std::vector<int> true_class;      // class implied by the hidden state
  std::vector<int> emitted_class;   // class the posterior concentrates on
  std::vector<bool> interfered;     // bbox replaced by the neighbor this frame
  long posture_switches = 0;        // standing<->lying toggle events
  long commanded_rotations = 0;     // direction-change events (excludes wall bounces)
  long tail_raise_onsets = 0;
};

struct SimResult {
  std::vector<FrameFeature> frames;
  SimTrace trace;
};

namespace detail {

// Mean episode lengths (frames) for the persistent binary channels.
inline constexpr double kTailEpisodeFrames = 12.0;
inline constexpr double kWalkEpisodeFrames = 8.0;

// Two-state Markov chain that holds a target stationary probability while
// keeping episodes contiguous: P(on->off) = 1/len, P(off->on) chosen so the
// stationary on-fraction equals `fraction`.
struct BinaryChannel {
  double p_off;  // on -> off
  double p_on;   // off -> on
  BinaryChannel(double fraction, double episode_len) {
    p_off = 1.0 / episode_len;
    p_on = fraction <= 0.0 ? 0.0
                           : std::min(1.0, fraction / ((1.0 - fraction) * episode_len));
  }
  bool step(bool on, Rng& rng) const {
    return on ? !rng.bernoulli(p_off) : rng.bernoulli(p_on);
  }
};

// mass m on the target bin, the remainder spread over the others with
// exponential (Dirichlet(1)) noise.
template <size_t N>
std::array<double, N> concentrated_simplex(int target, double target_mass, Rng& rng) {
  std::array<double, N> out{};
  double sum = 0.0;
  for (size_t k = 0; k < N; ++k) {
    if (static_cast<int>(k) == target) continue;
    out[k] = -std::log(std::max(rng.uniform(), 1e-300));
    sum += out[k];
  }
  const double rest = 1.0 - target_mass;
  for (size_t k = 0; k < N; ++k)
    out[k] = static_cast<int>(k) == target ? target_mass : out[k] / sum * rest;
  return out;
}

}  // namespace detail

// Simulates one cow segment. A hidden state machine (posture, tail,
// walking, body direction, position) drives every feature channel
// coherently: the posterior concentrates on the emitted class, the heatmaps
// on the cells matching the body direction, and the bbox follows the walk
// trajectory. Deterministic per seed.
//
// interference_mask, when non-empty, gates the neighbor-interference draw
// per frame (used to corrupt selected windows only); when empty the
// profile probability applies to every frame.
inline SimResult simulate_cow(const BehaviorProfile& profile, int state_label, int n_frames,
                              uint64_t seed, const std::vector<bool>& interference_mask = {}) {
  profile.validate();
  if (n_frames < 1) throw ContractViolation("simulate_cow: n_frames must be >= 1");
  if (!interference_mask.empty() && static_cast<int>(interference_mask.size()) != n_frames)
    throw ContractViolation("simulate_cow: interference mask length mismatch");

  const StateRates& rates = state_label == 1 ? profile.pre_calving : profile.normal;
  Rng rng(seed);

  const double p_switch = rates.posture_switch_per_hour / kFramesPerHour;
  const double p_rotate = rates.rotation_per_hour / kFramesPerHour;
  const detail::BinaryChannel tail_chain(rates.tail_raise_prob, detail::kTailEpisodeFrames);
  const detail::BinaryChannel walk_chain(rates.walk_fraction, detail::kWalkEpisodeFrames);

  // Per-segment geometry.
  const double bw = rng.uniform(0.12, 0.18);
  const double bh = rng.uniform(0.10, 0.16);
  const double margin_x = bw / 2 + 0.02;
  const double margin_y = bh / 2 + 0.02;
  double x = rng.uniform(0.35, 0.65);
  double y = rng.uniform(0.35, 0.65);
  // Neighbor cow position used when interference fires.
  const double nx = std::clamp(x + rng.uniform(0.15, 0.3) * (rng.bernoulli(0.5) ? 1 : -1),
                               margin_x, 1.0 - margin_x);
  const double ny = std::clamp(y + rng.uniform(0.1, 0.25) * (rng.bernoulli(0.5) ? 1 : -1),
                               margin_y, 1.0 - margin_y);

  Posture posture = rng.bernoulli(0.5) ? Posture::standing : Posture::lying;
  bool tail_up = rng.bernoulli(rates.tail_raise_prob);
  bool walking = false;
  int direction = rng.pick(8);

  SimResult result;
  result.frames.reserve(static_cast<size_t>(n_frames));
  SimTrace& trace = result.trace;

  const auto& prototypes = class_prototypes();
  constexpr double r = 0.7071067811865476;  // 1/sqrt(2)
  static constexpr std::array<double, 8> kCos = {1, r, 0, -r, -1, -r, 0, r};
  static constexpr std::array<double, 8> kSin = {0, r, 1, r, 0, -r, -1, -r};

  for (int t = 0; t < n_frames; ++t) {
    // Hidden-state transitions.
    if (rng.bernoulli(p_switch)) {
      posture = posture == Posture::standing ? Posture::lying : Posture::standing;
      ++trace.posture_switches;
    }
    const bool was_up = tail_up;
    tail_up = tail_chain.step(tail_up, rng);
    if (tail_up && !was_up) ++trace.tail_raise_onsets;
    walking = posture == Posture::standing && walk_chain.step(walking, rng);
    if (rng.bernoulli(p_rotate)) {
      int next = rng.pick(7);
      if (next >= direction) ++next;  // any direction but the current one
      direction = next;
      ++trace.commanded_rotations;
    }
    if (walking) {
      x += rates.walk_speed * kCos[static_cast<size_t>(direction)];
      y += rates.walk_speed * kSin[static_cast<size_t>(direction)];
      // Bounce off the pen walls; the reflected heading is still a compass
      // direction, recorded as a real (uncommanded) turn.
      if (x < margin_x || x > 1.0 - margin_x) {
        x = std::clamp(x, margin_x, 1.0 - margin_x);
        direction = (4 - direction) & 7;  // mirror across the y axis
      }
      if (y < margin_y || y > 1.0 - margin_y) {
        y = std::clamp(y, margin_y, 1.0 - margin_y);
        direction = (8 - direction) & 7;  // mirror across the x axis
      }
    }

    // True frame class from the hidden state; garbage frames (calf in view,
    // occlusion, noise) override it for both channels.
    int true_cls;
    if (rng.bernoulli(profile.garbage_prob))
      true_cls = 3;
    else if (posture == Posture::lying)
      true_cls = 2;
    else
      true_cls = tail_up ? 0 : 1;
    // The stand-in classifier's perceived class: confused at a fixed rate.
    // The posterior follows the perceived class; the hidden vector follows
    // the true prototype.
    int emitted = true_cls;
    const bool confused = rng.bernoulli(profile.posture_confusion_prob);
    {
      int other = rng.pick(3);
      if (other >= true_cls) ++other;
      if (confused) emitted = other;
    }

    FrameFeature f;
    f.t = t;
    f.valid = true;
    f.posture_posterior =
        detail::concentrated_simplex<kPostureClasses>(emitted, rng.uniform(0.75, 0.95), rng);
    for (int k = 0; k < kHiddenDim; ++k)
      f.posture_hidden[static_cast<size_t>(k)] =
          prototypes[static_cast<size_t>(true_cls)][static_cast<size_t>(k)] +
          rates.hidden_noise * rng.gauss();

    const double neck_mass = 1.0 - rates.heatmap_noise * rng.uniform(0.5, 1.5);
    const double tail_mass = 1.0 - rates.heatmap_noise * rng.uniform(0.5, 1.5);
    f.neck_heatmap =
        detail::concentrated_simplex<kHeatmapCells>(direction_cell(direction), neck_mass, rng);
    f.tail_heatmap = detail::concentrated_simplex<kHeatmapCells>(
        direction_cell(opposite_direction(direction)), tail_mass, rng);

    const bool interference_allowed =
        interference_mask.empty() || interference_mask[static_cast<size_t>(t)];
    // The draw is consumed unconditionally so masked and unmasked runs of
    // the same seed stay frame-aligned on every other channel.
    const bool interference_draw = rng.bernoulli(profile.neighbor_interference_prob);
    const bool interfered = interference_allowed && interference_draw;
    const double cx = interfered ? nx : x;
    const double cy = interfered ? ny : y;
    f.bbox = {cx - bw / 2, cy - bh / 2, bw, bh};

    trace.posture.push_back(posture);
    trace.tail_up.push_back(tail_up);
    trace.motion.push_back(walking ? Motion::walking : Motion::idle);
    trace.direction.push_back(direction);
    trace.true_class.push_back(true_cls);
    trace.emitted_class.push_back(emitted);
    trace.interfered.push_back(interfered);
    result.frames.push_back(std::move(f));
  }
  return result;
}

// Marks each frame invalid with probability drop_rate and zeroes its
// payload; the first and last frame always survive so interpolation has
// anchors at both ends. Deterministic per seed.
inline std::vector<FrameFeature> apply_frame_dropping(std::vector<FrameFeature> frames,
                                                      double drop_rate, uint64_t seed) {
  if (drop_rate < 0.0 || drop_rate >= 1.0)
    throw ContractViolation("apply_frame_dropping: drop_rate must be in [0, 1)");
  Rng rng(seed);
  for (size_t i = 0; i < frames.size(); ++i) {
    const bool endpoint = i == 0 || i + 1 == frames.size();
    if (!endpoint && rng.bernoulli(drop_rate)) {
      FrameFeature dropped;
      dropped.t = frames[i].t;
      dropped.valid = false;
      frames[i] = dropped;
    }
  }
  return frames;
}

}  // namespace calving::synth
