#pragma once

#include <string>

#include "calving/common.hpp"

namespace calving::synth {

// Event rates and noise scales for one behavioral state. Rates are per
// simulated hour (360 frames at 0.1 fps); fractions are stationary
// probabilities of the corresponding hidden state.
struct StateRates {
  double posture_switch_per_hour = 0.0;  // standing <-> lying toggles
  double tail_raise_prob = 0.0;          // stationary fraction of frames with tail up
  double rotation_per_hour = 0.0;        // commanded body-direction changes
  double walk_fraction = 0.0;            // fraction of standing frames spent walking
  double walk_speed = 0.0;               // normalized units per frame while walking
  double heatmap_noise = 0.0;            // off-cell heatmap mass scale, <= 0.26
  double hidden_noise = 0.0;             // gaussian sigma around class prototypes
};

struct BehaviorProfile {
  StateRates normal;
  StateRates pre_calving;
  double garbage_prob = 0.05;               // chance a frame reads as the garbage class
  // Frame-wise classifier confusion: the posture posterior concentrates on a
  // perceived class that differs from the true one at this rate, while the
  // hidden vector keeps tracking the true class. The hidden layer carries
  // more information than the output posterior, matching the frame
  // classifier's moderate-accuracy regime.
  double posture_confusion_prob = 0.25;
  double neighbor_interference_prob = 0.0;  // per-frame bbox capture by the neighbor cow

  // Pre-calving sign parameters must strictly exceed the normal-state ones.
  void validate() const {
    auto check = [](double pre, double normal, const std::string& name) {
      if (!(pre > normal))
        throw ContractViolation("behavior profile: pre-calving " + name + " (" +
                                std::to_string(pre) + ") must exceed normal (" +
                                std::to_string(normal) + ")");
    };
    check(pre_calving.posture_switch_per_hour, normal.posture_switch_per_hour,
          "posture_switch_per_hour");
    check(pre_calving.tail_raise_prob, normal.tail_raise_prob, "tail_raise_prob");
    check(pre_calving.rotation_per_hour, normal.rotation_per_hour, "rotation_per_hour");
    check(pre_calving.walk_fraction, normal.walk_fraction, "walk_fraction");
    for (const StateRates* r : {&normal, &pre_calving}) {
      if (r->tail_raise_prob < 0 || r->tail_raise_prob >= 1)
        throw ContractViolation("behavior profile: tail_raise_prob must be in [0, 1)");
      if (r->walk_fraction < 0 || r->walk_fraction >= 1)
        throw ContractViolation("behavior profile: walk_fraction must be in [0, 1)");
      if (r->posture_switch_per_hour < 0 || r->rotation_per_hour < 0 || r->walk_speed < 0)
        throw ContractViolation("behavior profile: rates must be non-negative");
      if (r->heatmap_noise < 0 || r->heatmap_noise > 0.26)
        throw ContractViolation(
            "behavior profile: heatmap_noise must be in [0, 0.26] to keep the "
            "target cell above 0.6 mass");
      if (r->hidden_noise < 0)
        throw ContractViolation("behavior profile: hidden_noise must be non-negative");
    }
    if (garbage_prob < 0 || garbage_prob >= 0.5)
      throw ContractViolation("behavior profile: garbage_prob must be in [0, 0.5)");
    if (posture_confusion_prob < 0 || posture_confusion_prob >= 0.5)
      throw ContractViolation("behavior profile: posture_confusion_prob must be in [0, 0.5)");
    if (neighbor_interference_prob < 0 || neighbor_interference_prob >= 1)
      throw ContractViolation("behavior profile: neighbor_interference_prob must be in [0, 1)");
  }
};

// Defaults are documented in the README; they are chosen so every stream
// carries signal without being trivially separable, not claimed as
// ethologically calibrated. The class signal sits mainly in the dynamics
// (switch/rotation rates, walking bursts) rather than static fractions.
inline BehaviorProfile default_profile() {
  BehaviorProfile p;
  p.normal = {1.0, 0.08, 4.0, 0.05, 0.03, 0.18, 0.45};
  p.pre_calving = {8.0, 0.24, 14.0, 0.30, 0.06, 0.18, 0.45};
  p.garbage_prob = 0.05;
  p.posture_confusion_prob = 0.35;
  p.neighbor_interference_prob = 0.0;
  return p;
}

}  // namespace calving::synth
