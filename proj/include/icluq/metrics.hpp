// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file metrics.hpp
 * @brief Threshold-free detection metrics: AUROC and AUPR.
 *
 * AUROC follows the Mann-Whitney formulation: the probability that a random
 * positive outscores a random negative, with ties counted 0.5. AUPR is
 * average precision over descending-score thresholds with tied scores
 * processed as one group. Scores are "higher = more uncertain / more
 * positive"; labels are 0/1.
 */

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "icluq/error.hpp"

namespace icluq::metrics {

namespace detail {

/// Indices of `scores` sorted by descending score.
inline std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

inline void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
  ICLUQ_REQUIRE(scores.size() == labels.size(), ErrorCode::ShapeMismatch,
                "scores and labels differ in length");
  ICLUQ_REQUIRE(!scores.empty(), ErrorCode::InvalidArgument, "empty input");
  for (int y : labels)
    ICLUQ_REQUIRE(y == 0 || y == 1, ErrorCode::InvalidArgument, "labels must be 0 or 1");
}

}  // namespace detail

/// Area under the ROC curve. Throws SingleClass unless both classes occur.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  detail::check_inputs(scores, labels);
  const std::size_t n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  ICLUQ_REQUIRE(n_pos > 0 && n_neg > 0, ErrorCode::SingleClass,
                "AUROC needs both classes present");

  // Rank-sum with average ranks over tie groups (ascending score order).
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Area under the precision-recall curve (average precision). Throws
/// NoPositives when no positive labels are present.
inline double aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
  detail::check_inputs(scores, labels);
  const std::size_t n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  ICLUQ_REQUIRE(n_pos > 0, ErrorCode::NoPositives, "AUPR needs at least one positive");

  const auto order = detail::descending_order(scores);
  double ap = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i, group_tp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1)
        ++group_tp;
      else
        ++fp;
      ++j;
    }
    tp += group_tp;
    if (group_tp > 0)
      ap += static_cast<double>(group_tp) * static_cast<double>(tp) /
            static_cast<double>(tp + fp);
    i = j;
  }
  return ap / static_cast<double>(n_pos);
}

/// One operating point of a detection curve.
struct CurvePoint {
  double x = 0.0;  // FPR for ROC, recall for PR
  double y = 0.0;  // TPR for ROC, precision for PR
  double threshold = 0.0;
};

/// ROC curve points, one per distinct threshold, starting at (0, 0).
inline std::vector<CurvePoint> roc_points(const std::vector<double>& scores,
                                          const std::vector<int>& labels) {
  detail::check_inputs(scores, labels);
  const std::size_t n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  ICLUQ_REQUIRE(n_pos > 0 && n_neg > 0, ErrorCode::SingleClass, "ROC needs both classes");

  const auto order = detail::descending_order(scores);
  std::vector<CurvePoint> points{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1)
        ++tp;
      else
        ++fp;
      ++j;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                      static_cast<double>(tp) / static_cast<double>(n_pos), scores[order[i]]});
    i = j;
  }
  return points;
}

/// PR curve points, one per distinct threshold.
inline std::vector<CurvePoint> pr_points(const std::vector<double>& scores,
                                         const std::vector<int>& labels) {
  detail::check_inputs(scores, labels);
  const std::size_t n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  ICLUQ_REQUIRE(n_pos > 0, ErrorCode::NoPositives, "PR needs at least one positive");

  const auto order = detail::descending_order(scores);
  std::vector<CurvePoint> points;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1)
        ++tp;
      else
        ++fp;
      ++j;
    }
    points.push_back({static_cast<double>(tp) / static_cast<double>(n_pos),
                      static_cast<double>(tp) / static_cast<double>(tp + fp),
                      scores[order[i]]});
    i = j;
  }
  return points;
}

}  // namespace icluq::metrics
