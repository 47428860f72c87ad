#pragma once

#include <cmath>
#include <vector>

#include "calving/common.hpp"

// Independent reference implementations used as test oracles. These are
// deliberately written as plain direct translations of the definitions and
// must not share code with the library.
namespace oracle {

inline std::vector<double> random_simplex(calving::Rng& rng, int dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  double sum = 0.0;
  for (double& x : v) {
    x = -std::log(std::max(rng.uniform(), 1e-300));
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

// Symmetric KL as the two explicit sums, with the same clamping rule.
inline double sym_kl(std::vector<double> p, std::vector<double> q) {
  double sp = 0, sq = 0;
  for (double& x : p) { x = std::max(x, 1e-12); sp += x; }
  for (double& x : q) { x = std::max(x, 1e-12); sq += x; }
  for (double& x : p) x /= sp;
  for (double& x : q) x /= sq;
  double d = 0.0;
  for (size_t k = 0; k < p.size(); ++k) d += p[k] * std::log(p[k] / q[k]);
  for (size_t k = 0; k < q.size(); ++k) d += q[k] * std::log(q[k] / p[k]);
  return d;
}

// Brute-force lag statistic: mean pair divergence per lag.
inline std::vector<double> m_measure(const std::vector<std::vector<double>>& seq, int dt_max) {
  std::vector<double> m;
  const int T = static_cast<int>(seq.size());
  for (int dt = 1; dt <= dt_max; ++dt) {
    double acc = 0.0;
    int n = 0;
    for (int t = dt; t < T; ++t) {
      acc += sym_kl(seq[static_cast<size_t>(t - dt)], seq[static_cast<size_t>(t)]);
      ++n;
    }
    m.push_back(acc / n);
  }
  return m;
}

// Mean-value interpolation by explicit nearest-anchor search per frame.
inline std::vector<std::vector<double>> interpolate_mean(std::vector<std::vector<double>> v,
                                                         const std::vector<bool>& ok) {
  const long n = static_cast<long>(v.size());
  std::vector<std::vector<double>> out = v;
  for (long t = 0; t < n; ++t) {
    if (ok[static_cast<size_t>(t)]) continue;
    long a = -1, b = -1;
    for (long s = t - 1; s >= 0; --s)
      if (ok[static_cast<size_t>(s)]) { a = s; break; }
    for (long s = t + 1; s < n; ++s)
      if (ok[static_cast<size_t>(s)]) { b = s; break; }
    for (size_t k = 0; k < v[static_cast<size_t>(t)].size(); ++k) {
      if (a >= 0 && b >= 0)
        out[static_cast<size_t>(t)][k] =
            (v[static_cast<size_t>(a)][k] + v[static_cast<size_t>(b)][k]) / 2.0;
      else if (a >= 0)
        out[static_cast<size_t>(t)][k] = v[static_cast<size_t>(a)][k];
      else
        out[static_cast<size_t>(t)][k] = v[static_cast<size_t>(b)][k];
    }
  }
  return out;
}

inline std::vector<std::vector<double>> interpolate_linear(std::vector<std::vector<double>> v,
                                                           const std::vector<bool>& ok) {
  const long n = static_cast<long>(v.size());
  std::vector<std::vector<double>> out = v;
  for (long t = 0; t < n; ++t) {
    if (ok[static_cast<size_t>(t)]) continue;
    long a = -1, b = -1;
    for (long s = t - 1; s >= 0; --s)
      if (ok[static_cast<size_t>(s)]) { a = s; break; }
    for (long s = t + 1; s < n; ++s)
      if (ok[static_cast<size_t>(s)]) { b = s; break; }
    for (size_t k = 0; k < v[static_cast<size_t>(t)].size(); ++k) {
      if (a >= 0 && b >= 0) {
        const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
        out[static_cast<size_t>(t)][k] =
            v[static_cast<size_t>(a)][k] +
            (v[static_cast<size_t>(b)][k] - v[static_cast<size_t>(a)][k]) * w;
      } else if (a >= 0) {
        out[static_cast<size_t>(t)][k] = v[static_cast<size_t>(a)][k];
      } else {
        out[static_cast<size_t>(t)][k] = v[static_cast<size_t>(b)][k];
      }
    }
  }
  return out;
}

// AUC as the Mann-Whitney pair statistic with ties counted one half.
inline double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace oracle
