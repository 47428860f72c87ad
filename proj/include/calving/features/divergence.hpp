#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "calving/common.hpp"

namespace calving::features {

inline constexpr int kMMeasureLags = 32;

// Symmetric KL divergence, natural log. Entries are clamped at 1e-12 and
// renormalized before the logs so near-one-hot inputs stay finite.
// Written as sum_k (p_k - q_k)(ln p_k - ln q_k), which is bitwise symmetric.
inline double symmetric_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw ContractViolation("symmetric_kl: dimension mismatch " + std::to_string(p.size()) +
                            " vs " + std::to_string(q.size()));
  if (p.empty()) throw ContractViolation("symmetric_kl: empty vectors");
  if (!is_simplex(p) || !is_simplex(q))
    throw ContractViolation("symmetric_kl: inputs must lie on the probability simplex");
  const std::vector<double> cp = clamp_simplex(p);
  const std::vector<double> cq = clamp_simplex(q);
  double d = 0.0;
  for (size_t k = 0; k < cp.size(); ++k)
    d += (cp[k] - cq[k]) * (std::log(cp[k]) - std::log(cq[k]));
  return d;
}

// Average symmetric KL between posteriors separated by lag dt, for
// dt = 1..dt_max. Each lag is normalized by the exact number of summed
// pairs (T - dt), so a constant sequence gives exactly zero and an
// alternating sequence gives exactly the pair divergence at odd lags.
inline std::vector<double> m_measure(const std::vector<std::vector<double>>& posteriors,
                                     int dt_max = kMMeasureLags) {
  const int T = static_cast<int>(posteriors.size());
  if (dt_max < 1) throw ContractViolation("m_measure: dt_max must be >= 1");
  if (T <= dt_max)
    throw ContractViolation("m_measure: sequence length " + std::to_string(T) +
                            " must exceed dt_max " + std::to_string(dt_max));
  const size_t dim = posteriors.front().size();
  // Clamp and take logs once per frame; every pair then reduces to
  // sum_k (p_k - q_k)(ln p_k - ln q_k), bitwise equal to symmetric_kl.
  std::vector<std::vector<double>> cp(posteriors.size()), lp(posteriors.size());
  for (size_t t = 0; t < posteriors.size(); ++t) {
    if (posteriors[t].size() != dim)
      throw ContractViolation("m_measure: ragged posterior sequence");
    if (!is_simplex(posteriors[t]))
      throw ContractViolation("m_measure: posterior at frame " + std::to_string(t) +
                              " is not on the simplex");
    cp[t] = clamp_simplex(posteriors[t]);
    lp[t].resize(dim);
    for (size_t k = 0; k < dim; ++k) lp[t][k] = std::log(cp[t][k]);
  }
  std::vector<double> m(static_cast<size_t>(dt_max), 0.0);
  for (int dt = 1; dt <= dt_max; ++dt) {
    double acc = 0.0;
    for (int t = dt; t < T; ++t) {
      const auto& pa = cp[static_cast<size_t>(t - dt)];
      const auto& pb = cp[static_cast<size_t>(t)];
      const auto& la = lp[static_cast<size_t>(t - dt)];
      const auto& lb = lp[static_cast<size_t>(t)];
      double d = 0.0;
      for (size_t k = 0; k < dim; ++k) d += (pa[k] - pb[k]) * (la[k] - lb[k]);
      acc += d;
    }
    m[static_cast<size_t>(dt - 1)] = acc / static_cast<double>(T - dt);
  }
  return m;
}

}  // namespace calving::features
