#pragma once

#include <cmath>
#include <vector>

#include "calving/common.hpp"
#include "calving/features/divergence.hpp"
#include "calving/features/interpolate.hpp"
#include "calving/frame.hpp"

namespace calving::features {

// concat(elementwise max, elementwise mean) over frames; order-free.
inline std::vector<double> max_avg_pool(const std::vector<std::vector<double>>& frames) {
  if (frames.empty()) throw ContractViolation("max_avg_pool: empty window");
  const size_t dim = frames.front().size();
  std::vector<double> mx(dim, -std::numeric_limits<double>::infinity());
  std::vector<double> avg(dim, 0.0);
  for (const auto& f : frames) {
    if (f.size() != dim) throw ContractViolation("max_avg_pool: ragged frames");
    for (size_t k = 0; k < dim; ++k) {
      mx[k] = std::max(mx[k], f[k]);
      avg[k] += f[k];
    }
  }
  std::vector<double> out;
  out.reserve(2 * dim);
  out.insert(out.end(), mx.begin(), mx.end());
  for (double a : avg) out.push_back(a / static_cast<double>(frames.size()));
  return out;
}

namespace detail {

inline void require_window(const std::vector<FrameFeature>& frames) {
  if (static_cast<int>(frames.size()) != kWindowFrames)
    throw ContractViolation("window must have " + std::to_string(kWindowFrames) +
                            " frames, got " + std::to_string(frames.size()));
}

inline std::vector<bool> validity(const std::vector<FrameFeature>& frames) {
  std::vector<bool> v(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) v[i] = frames[i].valid;
  return v;
}

template <class Getter>
std::vector<std::vector<double>> channel(const std::vector<FrameFeature>& frames, Getter get) {
  std::vector<std::vector<double>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    auto c = get(f);
    out.emplace_back(c.begin(), c.end());
  }
  return out;
}

}  // namespace detail

// 512-d posture feature: the 256-d hidden vectors are repaired with
// mean-value interpolation, then max+avg pooled over the window.
inline std::vector<double> posture_feature(const std::vector<FrameFeature>& frames) {
  detail::require_window(frames);
  auto hidden = detail::channel(frames, [](const FrameFeature& f) { return f.posture_hidden; });
  return max_avg_pool(interpolate_mean(hidden, detail::validity(frames)));
}

// 64-d rotation feature: linear interpolation of the two heatmaps, then the
// neck and tail M-measures concatenated.
inline std::vector<double> rotation_feature(const std::vector<FrameFeature>& frames) {
  detail::require_window(frames);
  const auto valid = detail::validity(frames);
  auto neck = interpolate_linear(
      detail::channel(frames, [](const FrameFeature& f) { return f.neck_heatmap; }), valid);
  auto tail = interpolate_linear(
      detail::channel(frames, [](const FrameFeature& f) { return f.tail_heatmap; }), valid);
  std::vector<double> out = m_measure(neck);
  std::vector<double> mt = m_measure(tail);
  out.insert(out.end(), mt.begin(), mt.end());
  return out;
}

// 2x180 channel-major sequence of bbox-center deltas. The bbox track is
// repaired with linear interpolation; the first delta is zero-padded so the
// sequence keeps the window length.
inline Tensor movement_feature(const std::vector<FrameFeature>& frames) {
  detail::require_window(frames);
  auto boxes = interpolate_linear(
      detail::channel(frames, [](const FrameFeature& f) { return f.bbox; }),
      detail::validity(frames));
  Tensor deltas(2, kWindowFrames);
  double px = 0.0, py = 0.0;
  for (int t = 0; t < kWindowFrames; ++t) {
    const auto& b = boxes[static_cast<size_t>(t)];
    const double cx = b[0] + b[2] / 2.0;
    const double cy = b[1] + b[3] / 2.0;
    if (t > 0) {
      deltas.at(0, t) = cx - px;
      deltas.at(1, t) = cy - py;
    }
    px = cx;
    py = cy;
  }
  return deltas;
}

// Per-channel mean and population standard deviation of the delta sequence,
// in channel order: mean_x, std_x, mean_y, std_y.
inline std::vector<double> movement_summary(const Tensor& deltas) {
  if (deltas.channels != 2) throw ContractViolation("movement_summary: expected 2 channels");
  std::vector<double> out;
  out.reserve(4);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (int t = 0; t < deltas.length; ++t) mean += deltas.at(c, t);
    mean /= deltas.length;
    double var = 0.0;
    for (int t = 0; t < deltas.length; ++t) {
      const double d = deltas.at(c, t) - mean;
      var += d * d;
    }
    out.push_back(mean);
    out.push_back(std::sqrt(var / deltas.length));
  }
  return out;
}

// 580-d stream-mixer input: movement summary (4) + rotation (64) + posture (512).
inline std::vector<double> mixer_input(const std::vector<double>& posture,
                                       const std::vector<double>& rotation,
                                       const Tensor& movement) {
  std::vector<double> out = movement_summary(movement);
  out.insert(out.end(), rotation.begin(), rotation.end());
  out.insert(out.end(), posture.begin(), posture.end());
  return out;
}

// Raw-coordinate variant (config knob): the full 2x180 delta sequence
// flattened instead of the 4 summary statistics; 936-d.
inline std::vector<double> mixer_input_raw(const std::vector<double>& posture,
                                           const std::vector<double>& rotation,
                                           const Tensor& movement) {
  std::vector<double> out(movement.v.begin(), movement.v.end());
  out.insert(out.end(), rotation.begin(), rotation.end());
  out.insert(out.end(), posture.begin(), posture.end());
  return out;
}

}  // namespace calving::features
