#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "calving/common.hpp"

namespace calving::eval {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

// prediction = (score >= threshold); pre-calving (label 1) is the positive
// class throughout.
inline ConfusionCounts confusion_counts(std::span<const double> scores,
                                        std::span<const int> labels, double threshold) {
  if (scores.empty()) throw ContractViolation("confusion_counts: empty input");
  if (scores.size() != labels.size())
    throw ContractViolation("confusion_counts: score/label length mismatch");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ContractViolation("confusion_counts: threshold must be in (0, 1)");
  ConfusionCounts c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++c.tp;
    else if (pred && !pos) ++c.fp;
    else if (!pred && pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Degenerate ratios (0/0) are reported as 0 with the corresponding defined
// flag cleared rather than thrown.
struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

inline PrfResult precision_recall_f1(const ConfusionCounts& c) {
  PrfResult r;
  if (c.tp + c.fp == 0) {
    r.precision_defined = false;
  } else {
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    r.recall_defined = false;
  } else {
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (!r.precision_defined || !r.recall_defined || r.precision + r.recall == 0.0) {
    r.f1_defined = false;
    r.f1 = 0.0;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  return r;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  double auc = 0.0;
  std::vector<RocPoint> points;  // monotone staircase from (0,0) to (1,1)
};

// Trapezoidal AUC over all distinct score thresholds, ties grouped; equal to
// the Mann-Whitney statistic with ties counted 0.5.
inline RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ContractViolation("roc_auc: score/label length mismatch");
  long pos = 0, neg = 0;
  for (int y : labels) (y == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw ContractViolation("roc_auc: both classes must be present");

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // stable for determinism
  });

  RocResult out;
  out.points.push_back({0.0, 0.0});
  double auc = 0.0;
  long tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    // Consume the whole tie group at this threshold.
    const double s = scores[order[i]];
    long dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? dtp : dfp)++;
      ++i;
    }
    const double fpr0 = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr0 = static_cast<double>(tp) / static_cast<double>(pos);
    tp += dtp;
    fp += dfp;
    const double fpr1 = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr1 = static_cast<double>(tp) / static_cast<double>(pos);
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
    out.points.push_back({fpr1, tpr1});
  }
  out.auc = auc;
  return out;
}

}  // namespace calving::eval
