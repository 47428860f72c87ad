#pragma once

#include <vector>

#include "calving/common.hpp"

namespace calving::features {

namespace detail {

enum class FillRule { mean, linear };

inline std::vector<std::vector<double>> interpolate(const std::vector<std::vector<double>>& v,
                                                    const std::vector<bool>& valid,
                                                    FillRule rule) {
  if (v.size() != valid.size())
    throw ContractViolation("interpolate: value/validity length mismatch");
  if (v.empty()) throw ContractViolation("interpolate: empty sequence");
  const size_t dim = v.front().size();
  int n_valid = 0;
  for (size_t t = 0; t < v.size(); ++t) {
    if (v[t].size() != dim) throw ContractViolation("interpolate: ragged vector sequence");
    if (valid[t]) ++n_valid;
  }
  if (n_valid == 0) throw ContractViolation("interpolate: all frames invalid");

  std::vector<std::vector<double>> out = v;
  const long n = static_cast<long>(v.size());
  long prev = -1;  // most recent valid index
  for (long t = 0; t < n; ++t) {
    if (valid[static_cast<size_t>(t)]) {
      prev = t;
      continue;
    }
    long next = t + 1;
    while (next < n && !valid[static_cast<size_t>(next)]) ++next;
    if (prev < 0) {
      out[static_cast<size_t>(t)] = v[static_cast<size_t>(next)];  // leading gap: copy anchor
    } else if (next >= n) {
      out[static_cast<size_t>(t)] = v[static_cast<size_t>(prev)];  // trailing gap
    } else {
      const auto& a = v[static_cast<size_t>(prev)];
      const auto& b = v[static_cast<size_t>(next)];
      auto& dst = out[static_cast<size_t>(t)];
      if (rule == FillRule::mean) {
        for (size_t k = 0; k < dim; ++k) dst[k] = 0.5 * (a[k] + b[k]);
      } else {
        const double w = static_cast<double>(t - prev) / static_cast<double>(next - prev);
        for (size_t k = 0; k < dim; ++k) dst[k] = a[k] + (b[k] - a[k]) * w;
      }
    }
  }
  return out;
}

}  // namespace detail

// Each invalid frame becomes the elementwise mean of the nearest valid
// frame on either side; valid frames are untouched.
inline std::vector<std::vector<double>> interpolate_mean(const std::vector<std::vector<double>>& v,
                                                         const std::vector<bool>& valid) {
  return detail::interpolate(v, valid, detail::FillRule::mean);
}

// Invalid frames are filled on the straight line between the nearest valid
// anchors, parameterized by frame index.
inline std::vector<std::vector<double>> interpolate_linear(
    const std::vector<std::vector<double>>& v, const std::vector<bool>& valid) {
  return detail::interpolate(v, valid, detail::FillRule::linear);
}

}  // namespace calving::features
