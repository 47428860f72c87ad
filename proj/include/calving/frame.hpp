#pragma once

#include <array>
#include <vector>

#include "calving/common.hpp"

namespace calving {

inline constexpr int kWindowFrames = 180;
inline constexpr int kPostureClasses = 4;  // standing+tail-raised, standing, lying, garbage
inline constexpr int kHiddenDim = 256;
inline constexpr int kHeatmapCells = 9;  // 3x3, row-major
inline constexpr double kFramesPerHour = 360.0;  // 0.1 fps

// Per-frame record produced by the simulator. A frame with valid == false
// was dropped in transit and carries no payload (all channels zeroed).
struct FrameFeature {
  int t = 0;
  bool valid = true;
  std::array<double, kPostureClasses> posture_posterior{};
  std::array<double, kHiddenDim> posture_hidden{};
  std::array<double, kHeatmapCells> neck_heatmap{};
  std::array<double, kHeatmapCells> tail_heatmap{};
  std::array<double, 4> bbox{};  // x, y, w, h in normalized image units
};

// 180 consecutive frames plus the classification target.
// label: 0 = normal, 1 = pre-calving.
struct WindowSample {
  int window_id = 0;
  int cow_id = 0;
  int label = 0;
  bool interference = false;  // bbox corrupted by a neighbor cow
  std::vector<FrameFeature> frames;
};

}  // namespace calving
