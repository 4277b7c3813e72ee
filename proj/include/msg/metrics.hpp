#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "msg/error.hpp"

namespace msg {

inline double metric_accuracy(std::span<const int> predicted, std::span<const int> truth, const std::vector<bool>& mask) {
  if (predicted.size() != truth.size() || mask.size() != truth.size())
    throw DimensionError("metric_accuracy: length mismatch");
  long hits = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hits += predicted[i] == truth[i];
  }
  if (total == 0) throw ConfigError("metric_accuracy: empty mask");
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct AucAp {
  double auc;
  double ap;
};

// AUC by the rank-sum formula with average ranks for ties; AP as the step sum
// over distinct score thresholds in decreasing order, sum (R_k - R_{k-1}) P_k.
inline AucAp metric_auc_ap(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("metric_auc_ap: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  long positives = 0;
  for (int y : labels) positives += y != 0;
  const long negatives = static_cast<long>(n) - positives;
  if (positives == 0 || negatives == 0) throw ConfigError("metric_auc_ap: need both positive and negative labels");

  // Walk tie groups from the top. Each group contributes pairs (pos in group,
  // neg below group) fully and (pos, neg) inside the group at half credit.
  double pair_credit = 0.0;  // in half-units to stay exact
  double ap = 0.0;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    long group_pos = 0, group_neg = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? group_pos : group_neg) += 1;
      ++j;
    }
    const long neg_below = negatives - fp - group_neg;
    pair_credit += 2.0 * static_cast<double>(group_pos) * static_cast<double>(neg_below) +
                   static_cast<double>(group_pos) * static_cast<double>(group_neg);
    tp += group_pos;
    fp += group_neg;
    if (group_pos > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += static_cast<double>(group_pos) / static_cast<double>(positives) * precision;
    }
    i = j;
  }
  const double auc = pair_credit / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
  return {auc, ap};
}

}  // namespace msg
